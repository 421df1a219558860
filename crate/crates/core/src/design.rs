//! Inverse design: choose coupling strengths (and optionally positions) so
//! that `Γ(ω) = γ|A(ω)|²` follows a target profile.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CouplingPoint, Layout, LayoutDocument, TargetSample, Waveguide};
use crate::optim::{levenberg_marquardt, LmOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignMode {
    #[default]
    Strengths,
    /// Strengths and all positions but the first.
    StrengthsAndPositions,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignProblem {
    pub target: Vec<TargetSample>,
    /// Fixed positions, or the starting positions in positions mode.
    pub positions: Vec<f64>,
    pub mode: DesignMode,
    /// Weight of `Σ s_k²` added to the cost.
    pub regularization: f64,
    pub waveguide: Waveguide,
    pub starts: usize,
    pub seed: u64,
    pub max_iterations: usize,
}

impl DesignProblem {
    pub fn new(target: Vec<TargetSample>, positions: Vec<f64>, waveguide: Waveguide) -> Self {
        DesignProblem {
            target,
            positions,
            mode: DesignMode::Strengths,
            regularization: 0.0,
            waveguide,
            starts: 16,
            seed: 0,
            max_iterations: 2000,
        }
    }

    /// Positions and target from a layout document; strengths are ignored.
    pub fn from_document(doc: &LayoutDocument) -> Result<Self> {
        let layout = doc.layout()?;
        Ok(Self::new(doc.target.clone(), layout.positions().collect(), doc.waveguide_model()?))
    }

    pub fn points(&self) -> usize {
        self.positions.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.points();
        if n == 0 {
            return Err(Error::invalid("design needs at least one coupling point"));
        }
        if self.target.is_empty() {
            return Err(Error::invalid("design needs at least one target sample"));
        }
        for (i, t) in self.target.iter().enumerate() {
            if !(t.omega.is_finite() && t.gamma.is_finite()) {
                return Err(Error::invalid(format!("target sample {i} is not finite")));
            }
            if t.gamma < 0.0 {
                return Err(Error::invalid(format!("target sample {i} has negative rate {}", t.gamma)));
            }
        }
        if self.positions.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("positions must be finite"));
        }
        if self.mode == DesignMode::StrengthsAndPositions && self.target.len() < 2 * n - 1 {
            return Err(Error::invalid(format!(
                "positions mode with {n} points needs at least {} target samples, got {}",
                2 * n - 1,
                self.target.len()
            )));
        }
        if !(self.regularization >= 0.0) {
            return Err(Error::invalid("regularization weight must be ≥ 0"));
        }
        if self.starts == 0 {
            return Err(Error::invalid("design needs at least one start"));
        }
        Ok(())
    }

    fn parameter_count(&self) -> usize {
        match self.mode {
            DesignMode::Strengths => self.points(),
            DesignMode::StrengthsAndPositions => 2 * self.points() - 1,
        }
    }

    fn unpack(&self, p: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
        let n = self.points();
        let s = p.rows(0, n).iter().copied().collect();
        let x = match self.mode {
            DesignMode::Strengths => self.positions.clone(),
            DesignMode::StrengthsAndPositions => {
                std::iter::once(self.positions[0]).chain(p.rows(n, n - 1).iter().copied()).collect()
            }
        };
        (s, x)
    }

    fn pack(&self, strengths: &[f64], positions: &[f64]) -> DVector<f64> {
        let mut p: Vec<f64> = strengths.to_vec();
        if self.mode == DesignMode::StrengthsAndPositions {
            p.extend_from_slice(&positions[1..]);
        }
        DVector::from_vec(p)
    }

    /// Misfits `Γ_model − Γ_target`, then `√λ·s_k`.
    fn residuals(&self, p: &DVector<f64>) -> DVector<f64> {
        let (s, x) = self.unpack(p);
        let gamma = self.waveguide.unit_rate();
        let v = self.waveguide.velocity();
        let n = self.points();
        let mut r = Vec::with_capacity(self.target.len() + n);
        for t in &self.target {
            let a: Complex64 = s.iter().zip(&x).map(|(s, x)| Complex64::from_polar(*s, t.omega * x / v)).sum();
            r.push(gamma * a.norm_sqr() - t.gamma);
        }
        if self.regularization > 0.0 {
            let w = self.regularization.sqrt();
            r.extend(s.iter().map(|s| w * s));
        }
        DVector::from_vec(r)
    }

    /// `∂Γ/∂s_k = 2γ Re(A* e^{iωx_k/v})`,
    /// `∂Γ/∂x_k = 2γ Re(A* i(ω/v) s_k e^{iωx_k/v})`.
    fn jacobian(&self, p: &DVector<f64>) -> DMatrix<f64> {
        let (s, x) = self.unpack(p);
        let gamma = self.waveguide.unit_rate();
        let v = self.waveguide.velocity();
        let n = self.points();
        let rows = self.target.len() + if self.regularization > 0.0 { n } else { 0 };
        let mut jac = DMatrix::zeros(rows, self.parameter_count());
        for (i, t) in self.target.iter().enumerate() {
            let e: Vec<Complex64> = x.iter().map(|x| Complex64::from_polar(1.0, t.omega * x / v)).collect();
            let a: Complex64 = s.iter().zip(&e).map(|(s, e)| s * e).sum();
            for k in 0..n {
                jac[(i, k)] = 2.0 * gamma * (a.conj() * e[k]).re;
            }
            if self.mode == DesignMode::StrengthsAndPositions {
                for k in 1..n {
                    let d = a.conj() * Complex64::new(0.0, t.omega / v) * s[k] * e[k];
                    jac[(i, n + k - 1)] = 2.0 * gamma * d.re;
                }
            }
        }
        if self.regularization > 0.0 {
            let w = self.regularization.sqrt();
            for k in 0..n {
                jac[(self.target.len() + k, k)] = w;
            }
        }
        jac
    }

    /// `Σ_i (Γ_model(ω_i) − Γ_i)²` for a layout with this problem's point
    /// count, ignoring regularization.
    pub fn misfit(&self, layout: &Layout) -> Result<f64> {
        let (s, x) = self.layout_parameters(layout)?;
        let plain = DesignProblem { regularization: 0.0, positions: x.clone(), ..self.clone() };
        Ok(plain.residuals(&plain.pack(&s, &x)).norm_squared())
    }

    fn layout_parameters(&self, layout: &Layout) -> Result<(Vec<f64>, Vec<f64>)> {
        if layout.len() != self.points() {
            return Err(Error::Dimension { expected: self.points(), got: layout.len() });
        }
        Ok((layout.strengths(0).collect(), layout.positions().collect()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignResult {
    pub layout: Layout,
    /// `Σ_i (Γ_model − Γ_i)²`.
    pub residual: f64,
    /// Residual plus the regularization term.
    pub cost: f64,
    pub converged: bool,
    pub best_start: usize,
    /// Final residual of every start, in start order.
    pub start_residuals: Vec<f64>,
    /// Cost after each accepted step of the winning start.
    pub history: Vec<f64>,
}

/// Multi-start Levenberg-Marquardt fit. Starts run in parallel; the lowest
/// cost wins, ties going to the lowest start index.
pub fn fit_layout(problem: &DesignProblem) -> Result<DesignResult> {
    problem.validate()?;
    let n = problem.points();
    let spacing = if n > 1 { (problem.positions[n - 1] - problem.positions[0]).abs() / (n - 1) as f64 } else { 1.0 };
    // Converged once the misfit is 1e−11 of the target's RMS magnitude.
    let cost_floor = (1e-22 * problem.target.iter().map(|t| t.gamma * t.gamma).sum::<f64>()).max(1e-300);
    let lm = LmOptions { max_iterations: problem.max_iterations, cost_tolerance: cost_floor, ..LmOptions::default() };
    let scale = problem.target.iter().map(|t| t.gamma).fold(0.0, f64::max) / problem.waveguide.unit_rate();
    let s_scale = (scale.sqrt() / n as f64).max(0.1);

    let runs: Vec<_> = (0..problem.starts)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(problem.seed.wrapping_add(i as u64));
            let s: Vec<f64> = (0..n).map(|_| s_scale * rng.random_range(0.2..2.0)).collect();
            let mut x = problem.positions.clone();
            if problem.mode == DesignMode::StrengthsAndPositions && i > 0 {
                for xk in x.iter_mut().skip(1) {
                    *xk += spacing * rng.random_range(-0.25..0.25);
                }
            }
            let p0 = problem.pack(&s, &x);
            levenberg_marquardt(|p| problem.residuals(p), |p| problem.jacobian(p), p0, &lm)
        })
        .collect();

    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.cost < runs[best].cost {
            best = i;
        }
    }
    let win = &runs[best];
    let (s, x) = problem.unpack(&win.params);
    let points = x.iter().zip(&s).map(|(x, s)| CouplingPoint::new(*x, *s)).collect();
    let layout = Layout::new("design", points)?;
    let residual_of = |p: &DVector<f64>| {
        let r = problem.residuals(p);
        r.rows(0, problem.target.len()).norm_squared()
    };
    Ok(DesignResult {
        residual: residual_of(&win.params),
        cost: win.cost,
        converged: win.converged,
        best_start: best,
        start_residuals: runs.iter().map(|r| residual_of(&r.params)).collect(),
        history: win.history.clone(),
        layout,
    })
}

/// Largest relative difference between the analytic cost gradient and
/// central finite differences (step `1e−6·max(|p|, 1)`), at `layout`.
pub fn gradient_check(problem: &DesignProblem, layout: &Layout) -> Result<f64> {
    problem.validate()?;
    let (s, x) = problem.layout_parameters(layout)?;
    let local = DesignProblem { positions: x.clone(), ..problem.clone() };
    let p = local.pack(&s, &x);
    let cost = |p: &DVector<f64>| local.residuals(p).norm_squared();
    let analytic = 2.0 * local.jacobian(&p).transpose() * local.residuals(&p);
    let mut numeric = DVector::zeros(p.len());
    for k in 0..p.len() {
        let h = 1e-6 * p[k].abs().max(1.0);
        let mut up = p.clone();
        let mut down = p.clone();
        up[k] += h;
        down[k] -= h;
        numeric[k] = (cost(&up) - cost(&down)) / (2.0 * h);
    }
    let scale = analytic.amax().max(numeric.amax());
    if scale == 0.0 {
        return Ok(0.0);
    }
    Ok((&analytic - &numeric).amax() / scale)
}
