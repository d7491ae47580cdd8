//! Deliberate single-constant perturbations used by the negative-control runs.

/// Which structure constant to corrupt. `None` is the only mode used for real computations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Fault {
    #[default]
    None,
    /// Adds one to the fast-path brace {p^{m+1}; 1, p^{m+1}-1} (in both orders).
    PerturbBrace,
    /// Adds one to the top coefficient of ∂_{<p^{m+1}>}·∂_{<1>}.
    PerturbMulCoeff,
    /// Omits the `i = 0` summand of the first coordinate in every Leibniz expansion.
    DropLeibnizTerm,
    /// Negates the top canonical-lift constant c_{p^{m+1}} (shifts it by one when p = 2).
    FlipKConstant,
    /// Adds one to the divided-power product constant of γ^[ε_1]·γ^[ε_1].
    PerturbGammaProduct,
}

impl Fault {
    pub fn name(self) -> &'static str {
        match self {
            Fault::None => "none",
            Fault::PerturbBrace => "perturb-brace",
            Fault::PerturbMulCoeff => "perturb-mul-coeff",
            Fault::DropLeibnizTerm => "drop-leibniz-term",
            Fault::FlipKConstant => "flip-k-constant",
            Fault::PerturbGammaProduct => "perturb-gamma-product",
        }
    }

    /// True when the Leibniz summand with `i == 0` in coordinate `coord` must be skipped.
    #[inline]
    pub(crate) fn skips_leibniz(self, coord: usize, i: u64, k: u64) -> bool {
        self == Fault::DropLeibnizTerm && coord == 0 && i == 0 && k > 0
    }
}
