use crate::state::State;

/// Candidate admissible couple `(V, phi)` with exact generator images.
///
/// Implementations evaluate `LV` and `L phi` in closed form from the owning
/// model; both vanish on absorbed states like `V` and `phi` themselves.
pub trait LyapunovPair: Sync {
    type State: State;

    fn v(&self, s: &Self::State) -> f64;

    fn phi(&self, s: &Self::State) -> f64;

    fn lv(&self, s: &Self::State) -> f64;

    fn lphi(&self, s: &Self::State) -> f64;

    /// Index `n` of the exhaustion set `O_n` the state first belongs to.
    fn exhaustion_level(&self, s: &Self::State) -> f64;
}

/// A finite checked domain as a sequence of shells, innermost first.
///
/// Shell `k` holds the states of `O_k` outside `O_{k-1}`; the last shell
/// stands in for "arbitrarily far out".
#[derive(Clone, Debug)]
pub struct Domain<S> {
    pub shells: Vec<Vec<S>>,
    pub description: String,
    /// Number of outermost shells that must be free of violations for a
    /// condition to hold; defaults to the outer half.
    pub clean_outer: Option<usize>,
}

impl<S> Domain<S> {
    pub fn new(shells: Vec<Vec<S>>, description: impl Into<String>) -> Self {
        Domain { shells, description: description.into(), clean_outer: None }
    }

    pub fn with_clean_outer(mut self, k: usize) -> Self {
        self.clean_outer = Some(k);
        self
    }

    /// Largest admissible index of the first violation-free shell.
    pub fn max_threshold_shell(&self) -> usize {
        let n = self.shells.len();
        match self.clean_outer {
            Some(k) => n.saturating_sub(k.max(1)),
            None => n / 2,
        }
    }

    pub fn len(&self) -> usize {
        self.shells.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &S)> {
        self.shells.iter().enumerate().flat_map(|(k, shell)| shell.iter().map(move |s| (k, s)))
    }

    /// States of shells `0..=k`.
    pub fn inner(&self, k: usize) -> impl Iterator<Item = &S> {
        self.shells.iter().take(k + 1).flatten()
    }
}
