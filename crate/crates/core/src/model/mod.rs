//! Domain types: waveguide, coupling points, layouts, multilevel atoms and
//! the ordering topology of two giant atoms.
//!
//! Units are whatever the caller uses consistently. The dimensionless
//! convention used throughout the crate is `v = 1` and a unit-strength
//! coupling point relaxing at rate `γ = 4πJ0 = 1`.

mod document;

pub use document::{AtomDoc, LayoutDocument, PointDoc, TargetSample, WaveguideDoc};

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A bidirectional 1D waveguide with constant density of states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Waveguide {
    velocity: f64,
    density_of_states: f64,
}

impl Waveguide {
    pub fn new(velocity: f64, density_of_states: f64) -> Result<Self> {
        if !(velocity.is_finite() && velocity > 0.0) {
            return Err(Error::invalid(format!("waveguide velocity must be > 0, got {velocity}")));
        }
        if !(density_of_states.is_finite() && density_of_states > 0.0) {
            return Err(Error::invalid(format!("density of states must be > 0, got {density_of_states}")));
        }
        Ok(Waveguide { velocity, density_of_states })
    }

    /// Waveguide whose unit-strength coupling point relaxes at `gamma`.
    pub fn with_unit_rate(velocity: f64, gamma: f64) -> Result<Self> {
        Self::new(velocity, gamma / (4.0 * PI))
    }

    /// `v = 1`, `γ = 1`.
    pub fn dimensionless() -> Self {
        Waveguide { velocity: 1.0, density_of_states: 1.0 / (4.0 * PI) }
    }

    pub fn velocity(&self) -> f64 {
        self.velocity
    }

    pub fn density_of_states(&self) -> f64 {
        self.density_of_states
    }

    /// Relaxation rate `4πJ0` of a single coupling point with unit strength.
    pub fn unit_rate(&self) -> f64 {
        4.0 * PI * self.density_of_states
    }

    /// Travel time over a distance.
    pub fn delay(&self, distance: f64) -> f64 {
        distance.abs() / self.velocity
    }

    /// Propagation phase `ω·d/v`.
    pub fn phase(&self, omega: f64, distance: f64) -> f64 {
        omega * distance / self.velocity
    }

    /// Frequency at which neighbouring points a distance `spacing` apart
    /// accumulate the phase `phi`.
    pub fn frequency_for_phase(&self, phi: f64, spacing: f64) -> f64 {
        phi * self.velocity / spacing
    }
}

impl Default for Waveguide {
    fn default() -> Self {
        Self::dimensionless()
    }
}

/// One point where an atom touches the waveguide.
///
/// `strengths[m]` is the amplitude for transition `m → m+1`; a shorter
/// vector reuses its last entry for the higher transitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingPoint {
    pub position: f64,
    pub strengths: Vec<f64>,
}

impl CouplingPoint {
    pub fn new(position: f64, strength: f64) -> Self {
        CouplingPoint { position, strengths: vec![strength] }
    }

    pub fn with_strengths(position: f64, strengths: Vec<f64>) -> Self {
        CouplingPoint { position, strengths }
    }

    pub fn strength(&self, transition: usize) -> f64 {
        match self.strengths.get(transition) {
            Some(&s) => s,
            None => self.strengths.last().copied().unwrap_or(0.0),
        }
    }
}

/// How coupling strengths grow with the transition index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransitionScaling {
    /// `g_m = √(m+1)·g_0`, as for a weakly anharmonic oscillator.
    #[default]
    Bosonic,
    /// `g_m = g_0`.
    Flat,
}

impl TransitionScaling {
    pub fn factor(self, transition: usize) -> f64 {
        match self {
            TransitionScaling::Bosonic => ((transition + 1) as f64).sqrt(),
            TransitionScaling::Flat => 1.0,
        }
    }
}

/// The coupling points of one giant atom, sorted by position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    label: String,
    points: Vec<CouplingPoint>,
}

impl Layout {
    pub fn new(label: impl Into<String>, mut points: Vec<CouplingPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("a layout needs at least one coupling point"));
        }
        for (k, p) in points.iter().enumerate() {
            if !p.position.is_finite() {
                return Err(Error::invalid(format!("coupling point {k} has non-finite position")));
            }
            if p.strengths.is_empty() {
                return Err(Error::invalid(format!("coupling point {k} has no strengths")));
            }
            if p.strengths.iter().any(|s| !s.is_finite()) {
                return Err(Error::invalid(format!("coupling point {k} has non-finite strength")));
            }
        }
        points.sort_by(|a, b| a.position.total_cmp(&b.position));
        Ok(Layout { label: label.into(), points })
    }

    /// Layout from positions with one strength each.
    pub fn from_positions(label: impl Into<String>, positions: &[f64], strength: f64) -> Result<Self> {
        Self::new(label, positions.iter().map(|&x| CouplingPoint::new(x, strength)).collect())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn points(&self) -> &[CouplingPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.position)
    }

    pub fn strengths(&self, transition: usize) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(move |p| p.strength(transition))
    }

    /// Distance between the outermost points.
    pub fn extent(&self) -> f64 {
        self.points[self.points.len() - 1].position - self.points[0].position
    }

    /// `x_2 − x_1`, or zero for a single point.
    pub fn first_spacing(&self) -> f64 {
        if self.points.len() < 2 {
            0.0
        } else {
            self.points[1].position - self.points[0].position
        }
    }

    pub fn translated(&self, shift: f64) -> Layout {
        let mut out = self.clone();
        for p in &mut out.points {
            p.position += shift;
        }
        out
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Layout {
        self.label = label.into();
        self
    }

    /// Expand the transition-0 strengths to `transitions` entries.
    pub fn with_transition_scaling(&self, transitions: usize, scaling: TransitionScaling) -> Layout {
        let mut out = self.clone();
        for p in &mut out.points {
            let base = p.strength(0);
            p.strengths = (0..transitions.max(1)).map(|m| base * scaling.factor(m)).collect();
        }
        out
    }

    /// Common spacing if the points are equidistant within `tol`.
    pub fn equidistant_spacing(&self, tol: f64) -> Option<f64> {
        if self.points.len() < 2 {
            return Some(0.0);
        }
        let d = self.first_spacing();
        self.points.windows(2).all(|w| (w[1].position - w[0].position - d).abs() <= tol * d.abs().max(1.0)).then_some(d)
    }

    /// Sum of squared strengths for a transition.
    pub fn strength_norm_sq(&self, transition: usize) -> f64 {
        self.strengths(transition).map(|s| s * s).sum()
    }
}

/// A multilevel atom with level energies `ω_0 < ω_1 < …`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomSpec {
    levels: Vec<f64>,
}

impl AtomSpec {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        if levels.len() < 2 {
            return Err(Error::invalid("an atom needs at least two levels"));
        }
        if levels.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid("level energies must be finite"));
        }
        if levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("level energies must be strictly increasing"));
        }
        Ok(AtomSpec { levels })
    }

    pub fn two_level(omega: f64) -> Result<Self> {
        Self::new(vec![0.0, omega])
    }

    /// Three levels with `ω_{2,1} = ω_{1,0} + anharmonicity`.
    pub fn three_level(omega_10: f64, anharmonicity: f64) -> Result<Self> {
        Self::new(vec![0.0, omega_10, 2.0 * omega_10 + anharmonicity])
    }

    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn energy(&self, m: usize) -> f64 {
        self.levels[m]
    }

    /// `ω_{m+1,m}`.
    pub fn transition(&self, m: usize) -> f64 {
        self.levels[m + 1] - self.levels[m]
    }

    /// `ω_{a,b} = ω_a − ω_b`.
    pub fn transition_between(&self, a: usize, b: usize) -> f64 {
        self.levels[a] - self.levels[b]
    }

    /// `σ_-^(m) = |m⟩⟨m+1|` as a matrix unit.
    pub fn lowering(&self, m: usize) -> DMatrix<Complex64> {
        let d = self.levels.len();
        let mut op = DMatrix::zeros(d, d);
        op[(m, m + 1)] = Complex64::new(1.0, 0.0);
        op
    }

    /// `σ_+^(m) = |m+1⟩⟨m|`.
    pub fn raising(&self, m: usize) -> DMatrix<Complex64> {
        self.lowering(m).adjoint()
    }

    /// `|m⟩⟨m|`.
    pub fn projector(&self, m: usize) -> DMatrix<Complex64> {
        let d = self.levels.len();
        let mut op = DMatrix::zeros(d, d);
        op[(m, m)] = Complex64::new(1.0, 0.0);
        op
    }
}

/// Relative ordering of the coupling points of two giant atoms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    /// Two single-point atoms.
    Small,
    /// `aabb`
    Separate,
    /// `abab`
    Braided,
    /// `abba`
    Nested,
    Unclassified,
}

impl Topology {
    pub const ALL: [Topology; 4] = [Topology::Small, Topology::Separate, Topology::Braided, Topology::Nested];

    /// Point ordering code used in CSV output.
    pub fn ordering(self) -> &'static str {
        match self {
            Topology::Small => "ab",
            Topology::Separate => "aabb",
            Topology::Braided => "abab",
            Topology::Nested => "abba",
            Topology::Unclassified => "unclassified",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Topology::Small => "small",
            Topology::Separate => "separate",
            Topology::Braided => "braided",
            Topology::Nested => "nested",
            Topology::Unclassified => "unclassified",
        }
    }

    pub fn parse(s: &str) -> Result<Topology> {
        match s.to_ascii_lowercase().as_str() {
            "small" | "ab" => Ok(Topology::Small),
            "separate" | "aabb" => Ok(Topology::Separate),
            "braided" | "abab" => Ok(Topology::Braided),
            "nested" | "abba" => Ok(Topology::Nested),
            other => Err(Error::invalid(format!("unknown topology '{other}'"))),
        }
    }

    /// Unit-spacing two-atom configuration with equal unit strengths.
    ///
    /// Neighbouring points are one length unit apart, so with `v = 1` the
    /// phase between neighbours equals the frequency.
    pub fn canonical_pair(self) -> Result<(Layout, Layout)> {
        let (a, b): (&[f64], &[f64]) = match self {
            Topology::Small => (&[0.0], &[1.0]),
            Topology::Separate => (&[0.0, 1.0], &[2.0, 3.0]),
            Topology::Braided => (&[0.0, 2.0], &[1.0, 3.0]),
            Topology::Nested => (&[0.0, 3.0], &[1.0, 2.0]),
            Topology::Unclassified => return Err(Error::invalid("no canonical layout for an unclassified ordering")),
        };
        Ok((Layout::from_positions("a", a, 1.0)?, Layout::from_positions("b", b, 1.0)?))
    }
}

impl std::fmt::Display for Topology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Strictly increasing samples of the neighbour phase `φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    values: Vec<f64>,
}

impl PhaseGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("phase grid is empty"));
        }
        if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::invalid("phase grid must be finite and strictly increasing"));
        }
        Ok(PhaseGrid { values })
    }

    /// `count` evenly spaced samples including both ends.
    pub fn linspace(start: f64, stop: f64, count: usize) -> Result<Self> {
        Self::new(crate::grid::linspace(start, stop, count))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Convert `φ = ω·spacing/v` samples to frequencies.
    pub fn to_frequencies(&self, waveguide: &Waveguide, spacing: f64) -> Vec<f64> {
        self.values.iter().map(|&p| waveguide.frequency_for_phase(p, spacing)).collect()
    }
}

/// `λ = 2πv/ω_{1,0}`.
pub fn wavelength(atom: &AtomSpec, waveguide: &Waveguide) -> f64 {
    2.0 * PI * waveguide.velocity() / atom.transition(0)
}

/// Classify the ordering of two giant atoms' coupling points.
///
/// Both single-point → `Small`; both two-point → `Separate`, `Braided` or
/// `Nested`; anything else → `Unclassified`. A coordinate shared between
/// the two atoms makes the ordering ambiguous and is rejected.
pub fn classify_topology(a: &Layout, b: &Layout) -> Result<Topology> {
    for pa in a.positions() {
        if b.positions().any(|pb| pb == pa) {
            return Err(Error::invalid(format!("atoms share the coordinate {pa}; ordering is ambiguous")));
        }
    }
    if a.len() == 1 && b.len() == 1 {
        return Ok(Topology::Small);
    }
    if a.len() != 2 || b.len() != 2 {
        return Ok(Topology::Unclassified);
    }
    let mut tagged: Vec<(f64, bool)> =
        a.positions().map(|x| (x, true)).chain(b.positions().map(|x| (x, false))).collect();
    tagged.sort_by(|l, r| l.0.total_cmp(&r.0));
    let s: Vec<bool> = tagged.iter().map(|t| t.1).collect();
    // Normalize so the leftmost point belongs to the first atom.
    let s: Vec<bool> = if s[0] { s } else { s.iter().map(|x| !x).collect() };
    Ok(match s.as_slice() {
        [true, true, false, false] => Topology::Separate,
        [true, false, true, false] => Topology::Braided,
        [true, false, false, true] => Topology::Nested,
        _ => Topology::Unclassified,
    })
}

/// `n` points at `0, d, …, (n−1)d`, all with the same strength.
pub fn equidistant_layout(n: usize, spacing: f64, strength: f64) -> Result<Layout> {
    if n == 0 {
        return Err(Error::invalid("equidistant layout needs N >= 1"));
    }
    if !(spacing.is_finite() && spacing >= 0.0) {
        return Err(Error::invalid(format!("spacing must be >= 0, got {spacing}")));
    }
    let points = (0..n).map(|k| CouplingPoint::new(k as f64 * spacing, strength)).collect();
    Layout::new("atom", points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavelength_examples() {
        let atom = AtomSpec::two_level(2.0 * PI).unwrap();
        let wg = Waveguide::with_unit_rate(1.0, 1.0).unwrap();
        assert!((wavelength(&atom, &wg) - 1.0).abs() < 1e-15);

        let wg2 = Waveguide::with_unit_rate(2.0, 1.0).unwrap();
        assert!((wavelength(&atom, &wg2) - 2.0).abs() < 1e-15);

        // Surface acoustic waves at 5 GHz: sub-micron scale.
        let saw = Waveguide::with_unit_rate(3000.0, 1.0).unwrap();
        let qubit = AtomSpec::two_level(2.0 * PI * 5e9).unwrap();
        let lam = wavelength(&qubit, &saw);
        assert!((lam - 6e-7).abs() < 1e-18);
        assert!(lam > 1e-7 && lam < 1e-5);
    }

    fn pair(a: &[f64], b: &[f64]) -> (Layout, Layout) {
        (Layout::from_positions("a", a, 1.0).unwrap(), Layout::from_positions("b", b, 1.0).unwrap())
    }

    #[test]
    fn topology_examples() {
        let (a, b) = pair(&[0.0, 1.0], &[2.0, 3.0]);
        assert_eq!(classify_topology(&a, &b).unwrap(), Topology::Separate);
        let (a, b) = pair(&[0.0, 2.0], &[1.0, 3.0]);
        assert_eq!(classify_topology(&a, &b).unwrap(), Topology::Braided);
        let (a, b) = pair(&[0.0, 3.0], &[1.0, 2.0]);
        assert_eq!(classify_topology(&a, &b).unwrap(), Topology::Nested);
        let (a, b) = pair(&[0.0], &[5.0]);
        assert_eq!(classify_topology(&a, &b).unwrap(), Topology::Small);
        let (a, b) = pair(&[0.0, 1.0, 4.0], &[2.0, 3.0]);
        assert_eq!(classify_topology(&a, &b).unwrap(), Topology::Unclassified);
        let (a, b) = pair(&[0.0, 1.0], &[1.0, 3.0]);
        assert!(classify_topology(&a, &b).is_err());
    }

    #[test]
    fn canonical_pairs_classify_as_themselves() {
        for t in Topology::ALL {
            let (a, b) = t.canonical_pair().unwrap();
            assert_eq!(classify_topology(&a, &b).unwrap(), t);
        }
    }

    #[test]
    fn equidistant_examples() {
        let l = equidistant_layout(1, 0.7, 1.0).unwrap();
        assert_eq!(l.positions().collect::<Vec<_>>(), vec![0.0]);
        let l = equidistant_layout(3, 1.0, 1.0).unwrap();
        assert_eq!(l.positions().collect::<Vec<_>>(), vec![0.0, 1.0, 2.0]);
        let l = equidistant_layout(2, 0.0, 1.0).unwrap();
        assert_eq!(l.extent(), 0.0);
        assert!(equidistant_layout(0, 1.0, 1.0).is_err());
        assert!(equidistant_layout(2, -1.0, 1.0).is_err());
    }

    #[test]
    fn atom_invariants() {
        assert!(AtomSpec::new(vec![0.0]).is_err());
        assert!(AtomSpec::new(vec![0.0, 1.0, 1.0]).is_err());
        let a = AtomSpec::three_level(10.0, -1.0).unwrap();
        assert_eq!(a.transition(0), 10.0);
        assert_eq!(a.transition(1), 9.0);
        assert_eq!(a.transition_between(2, 0), 19.0);
        let s = a.lowering(1);
        assert_eq!(s[(1, 2)].re, 1.0);
        assert_eq!(a.raising(1)[(2, 1)].re, 1.0);
    }

    #[test]
    fn bosonic_scaling() {
        let l = equidistant_layout(2, 1.0, 0.5).unwrap();
        let s = l.with_transition_scaling(2, TransitionScaling::Bosonic);
        assert!((s.points()[0].strength(1) - 0.5 * 2f64.sqrt()).abs() < 1e-15);
        let f = l.with_transition_scaling(2, TransitionScaling::Flat);
        assert_eq!(f.points()[1].strength(1), 0.5);
    }

    #[test]
    fn phase_grid_rejects_unsorted() {
        assert!(PhaseGrid::new(vec![0.0, 0.0]).is_err());
        assert!(PhaseGrid::new(vec![]).is_err());
        let g = PhaseGrid::linspace(0.0, PI, 3).unwrap();
        let w = g.to_frequencies(&Waveguide::with_unit_rate(2.0, 1.0).unwrap(), 0.5);
        assert!((w[2] - 4.0 * PI).abs() < 1e-12);
    }
}
