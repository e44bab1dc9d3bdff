//! Search for detuning/gain pairs where a cavity's two-photon amplitude
//! vanishes, which makes its equal-time correlation vanish to leading order.

use nalgebra::{Matrix2, Vector2};
use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::amplitude::{analytic_coefficients, project_and_solve};
use crate::error::{Error, Result};
use crate::lindblad::MasterEquationPoint;
use crate::model::{cpb_detunings, Cavity, Regime, SystemParams};

/// Central-difference step for the Jacobian, in units of ωₘ.
pub const FD_STEP: f64 = 1e-9;

/// Roots closer than this (Euclidean, units of ωₘ) are merged.
pub const DEDUPE_DISTANCE: f64 = 1e-8;

/// Step halvings allowed per Newton iteration.
pub const MAX_HALVINGS: usize = 20;

pub const MAX_NEWTON_ITERATIONS: usize = 80;

/// Window around `μ ± J`, in units of κ, that marks a pair as conventional blockade.
pub const CPB_WINDOW_KAPPA: f64 = 5.0;

/// Cutoff of the master-equation check attached to each pair.
pub const G2_CHECK_CUTOFF: usize = 4;

/// Printed-formula roots further than this from the solve-path roots are reported.
pub const PRINTED_ROOT_MISMATCH: f64 = 1e-6;

/// Acceptance bound for `|c_target|` at a root: `1e-10·E²`.
pub fn residual_tolerance(p: &SystemParams) -> f64 {
    1e-10 * p.drive_e * p.drive_e
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchGrid {
    pub delta_range: (f64, f64),
    pub lambda_range: (f64, f64),
    pub n_delta: usize,
    pub n_lambda: usize,
}

impl SearchGrid {
    pub fn new(
        delta_range: (f64, f64),
        lambda_range: (f64, f64),
        n_delta: usize,
        n_lambda: usize,
    ) -> Result<Self> {
        let g = SearchGrid {
            delta_range,
            lambda_range,
            n_delta,
            n_lambda,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [("delta", self.delta_range), ("lambda", self.lambda_range)] {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidGrid(format!("{name} range [{lo}, {hi}]")));
            }
        }
        if self.n_delta < 4 || self.n_lambda < 4 {
            return Err(Error::InvalidGrid(format!(
                "start counts {}x{} (need at least 4 each)",
                self.n_delta, self.n_lambda
            )));
        }
        Ok(())
    }

    /// Δ ∈ [-0.01, 0.01], λ ∈ [-5e-6, 5e-6].
    pub fn weak_default() -> Self {
        SearchGrid {
            delta_range: (-0.01, 0.01),
            lambda_range: (-5e-6, 5e-6),
            n_delta: 81,
            n_lambda: 4,
        }
    }

    /// Δ ∈ [-0.02, 0.1], λ ∈ [-5e-6, 5e-6].
    pub fn strong_default() -> Self {
        SearchGrid {
            delta_range: (-0.02, 0.1),
            lambda_range: (-5e-6, 5e-6),
            n_delta: 241,
            n_lambda: 4,
        }
    }

    pub fn for_regime(regime: Regime) -> Self {
        match regime {
            Regime::Weak => Self::weak_default(),
            Regime::Strong => Self::strong_default(),
        }
    }

    /// Same box with both start counts doubled.
    pub fn refined(&self) -> Self {
        SearchGrid {
            n_delta: 2 * self.n_delta,
            n_lambda: 2 * self.n_lambda,
            ..*self
        }
    }

    pub fn contains(&self, delta: f64, lambda: f64) -> bool {
        let (dl, dh) = self.delta_range;
        let (ll, lh) = self.lambda_range;
        (dl..=dh).contains(&delta) && (ll..=lh).contains(&lambda)
    }

    fn starts(&self) -> Vec<(f64, f64)> {
        let lin = |(lo, hi): (f64, f64), n: usize, k: usize| lo + (hi - lo) * k as f64 / (n - 1) as f64;
        let mut out = Vec::with_capacity(self.n_delta * self.n_lambda);
        for i in 0..self.n_delta {
            for j in 0..self.n_lambda {
                out.push((
                    lin(self.delta_range, self.n_delta, i),
                    lin(self.lambda_range, self.n_lambda, j),
                ));
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mechanism {
    #[serde(rename = "CPB")]
    Cpb,
    #[serde(rename = "UCPB")]
    Ucpb,
}

impl std::fmt::Display for Mechanism {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mechanism::Cpb => "CPB",
            Mechanism::Ucpb => "UCPB",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalPair {
    pub delta_opt: f64,
    pub lambda_opt: f64,
    /// `|c20|` (cavity 1) or `|c02|` (cavity 2) at the pair.
    pub residual: f64,
    pub cavity: Cavity,
    /// Master-equation g2 of `cavity` at the pair; `None` if that solve failed.
    pub g2_check: Option<f64>,
    pub mechanism: Mechanism,
    /// Set when the pair lies within the window of both `μ + J` and `μ - J`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proximity: Option<String>,
}

/// Two-photon amplitude of `cavity` from the projected solve at `(delta, lambda)`.
pub fn target_residual(delta: f64, lambda: f64, p: &SystemParams, cavity: Cavity) -> Result<C64> {
    require_zero_phases(p)?;
    let s = project_and_solve(&p.with_delta(delta).with_lambda(lambda))?;
    Ok(s.two_photon(cavity))
}

/// Same quantity from the printed closed forms.
pub fn printed_residual(delta: f64, lambda: f64, p: &SystemParams, cavity: Cavity) -> Result<C64> {
    let s = analytic_coefficients(&p.with_delta(delta).with_lambda(lambda))?;
    Ok(s.two_photon(cavity))
}

fn require_zero_phases(p: &SystemParams) -> Result<()> {
    if p.theta != 0.0 || p.phi != 0.0 {
        return Err(Error::InvalidParams(
            "the optimal-pair search assumes theta = phi = 0".into(),
        ));
    }
    Ok(())
}

/// A converged Newton root before annotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub delta: f64,
    pub lambda: f64,
    pub residual: f64,
}

fn newton<F>(f: &F, start: (f64, f64), tol: f64) -> Option<Root>
where
    F: Fn(f64, f64) -> Result<C64>,
{
    let (mut x, mut y) = start;
    let mut r = f(x, y).ok()?;
    for _ in 0..MAX_NEWTON_ITERATIONS {
        if r.norm() <= tol * 1e-3 {
            break;
        }
        let h = FD_STEP;
        let dx = (f(x + h, y).ok()? - f(x - h, y).ok()?) / (2.0 * h);
        let dy = (f(x, y + h).ok()? - f(x, y - h).ok()?) / (2.0 * h);
        let jac = Matrix2::new(dx.re, dy.re, dx.im, dy.im);
        let step = jac.lu().solve(&Vector2::new(-r.re, -r.im))?;
        if !(step[0].is_finite() && step[1].is_finite()) {
            return None;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let (nx, ny) = (x + t * step[0], y + t * step[1]);
            if let Ok(nr) = f(nx, ny) {
                if nr.norm() < r.norm() {
                    accepted = Some((nx, ny, nr));
                    break;
                }
            }
            t *= 0.5;
        }
        match accepted {
            Some((nx, ny, nr)) => {
                x = nx;
                y = ny;
                r = nr;
            }
            None => break,
        }
    }
    (r.norm() <= tol).then_some(Root {
        delta: x,
        lambda: y,
        residual: r.norm(),
    })
}

fn dedupe(mut roots: Vec<Root>) -> Vec<Root> {
    roots.sort_by(|a, b| a.delta.total_cmp(&b.delta).then(a.lambda.total_cmp(&b.lambda)));
    let mut out: Vec<Root> = Vec::new();
    for r in roots {
        let dup = out
            .iter_mut()
            .find(|q| (q.delta - r.delta).hypot(q.lambda - r.lambda) <= DEDUPE_DISTANCE);
        match dup {
            Some(q) if r.residual < q.residual => *q = r,
            Some(_) => {}
            None => out.push(r),
        }
    }
    out.sort_by(|a, b| a.delta.total_cmp(&b.delta));
    out
}

fn search<F>(f: F, p: &SystemParams, grid: &SearchGrid) -> Result<Vec<Root>>
where
    F: Fn(f64, f64) -> Result<C64> + Sync,
{
    grid.validate()?;
    require_zero_phases(p)?;
    if p.drive_e <= 0.0 {
        log::warn!("no drive: the two-photon amplitude has no isolated zeros");
        return Ok(Vec::new());
    }
    let tol = residual_tolerance(p);
    let roots: Vec<Root> = grid
        .starts()
        .into_par_iter()
        .filter_map(|s| newton(&f, s, tol))
        .filter(|r| grid.contains(r.delta, r.lambda))
        .collect();
    let roots = dedupe(roots);
    if roots.is_empty() {
        log::warn!("no optimal pairs found in the search grid");
    }
    Ok(roots)
}

/// Converged zeros of the solve-path residual inside `grid`, sorted by Δ.
pub fn find_roots(p: &SystemParams, cavity: Cavity, grid: &SearchGrid) -> Result<Vec<Root>> {
    search(|d, l| target_residual(d, l, p, cavity), p, grid)
}

/// Converged zeros of the printed closed-form residual inside `grid`.
pub fn find_printed_roots(p: &SystemParams, cavity: Cavity, grid: &SearchGrid) -> Result<Vec<Root>> {
    search(|d, l| printed_residual(d, l, p, cavity), p, grid)
}

/// Roots with master-equation g2 and mechanism annotations, sorted by Δ.
pub fn find_optimal_pairs(p: &SystemParams, cavity: Cavity, grid: &SearchGrid) -> Result<Vec<OptimalPair>> {
    let roots = find_roots(p, cavity, grid)?;
    Ok(roots
        .par_iter()
        .map(|r| annotate(r, p, cavity))
        .collect())
}

fn annotate(r: &Root, p: &SystemParams, cavity: Cavity) -> OptimalPair {
    let at = p.with_delta(r.delta).with_lambda(r.lambda);
    let g2_check = MasterEquationPoint::solve(&at, G2_CHECK_CUTOFF)
        .and_then(|m| m.g2(cavity))
        .ok();
    let mut pair = OptimalPair {
        delta_opt: r.delta,
        lambda_opt: r.lambda,
        residual: r.residual,
        cavity,
        g2_check,
        mechanism: Mechanism::Ucpb,
        proximity: None,
    };
    let c = classify_mechanism(&pair, p);
    pair.mechanism = c.mechanism;
    pair.proximity = c.proximity;
    pair
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub mechanism: Mechanism,
    pub proximity: Option<String>,
}

/// CPB iff the coupling regime is strong and Δ lies within 5κ of `μ + J` or `μ - J`.
pub fn classify_mechanism(pair: &OptimalPair, p: &SystemParams) -> Classification {
    let (plus, minus) = cpb_detunings(p);
    let window = CPB_WINDOW_KAPPA * p.kappa;
    let d_plus = (pair.delta_opt - plus).abs();
    let d_minus = (pair.delta_opt - minus).abs();
    let near_plus = d_plus <= window;
    let near_minus = d_minus <= window;
    if p.regime() != Regime::Strong || !(near_plus || near_minus) {
        return Classification {
            mechanism: Mechanism::Ucpb,
            proximity: None,
        };
    }
    let proximity = (near_plus && near_minus && plus != minus).then(|| {
        format!(
            "within {CPB_WINDOW_KAPPA}κ of both μ+J ({d_plus:.3e} away) and μ-J ({d_minus:.3e} away)"
        )
    });
    Classification {
        mechanism: Mechanism::Cpb,
        proximity,
    }
}

/// Solve-path and printed-formula roots side by side.
#[derive(Debug, Clone, PartialEq)]
pub struct RootComparison {
    pub solve: Vec<Root>,
    pub printed: Vec<Root>,
}

impl RootComparison {
    /// Largest distance from a root in either set to the nearest root of the other.
    pub fn max_mismatch(&self) -> f64 {
        let nearest = |r: &Root, set: &[Root]| {
            set.iter()
                .map(|q| (q.delta - r.delta).hypot(q.lambda - r.lambda))
                .fold(f64::INFINITY, f64::min)
        };
        let a = self.solve.iter().map(|r| nearest(r, &self.printed));
        let b = self.printed.iter().map(|r| nearest(r, &self.solve));
        a.chain(b).fold(0.0, f64::max)
    }

    pub fn differs(&self) -> bool {
        self.max_mismatch() > PRINTED_ROOT_MISMATCH
    }
}

pub fn compare_printed_roots(p: &SystemParams, cavity: Cavity, grid: &SearchGrid) -> Result<RootComparison> {
    Ok(RootComparison {
        solve: find_roots(p, cavity, grid)?,
        printed: find_printed_roots(p, cavity, grid)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{strong_params, weak_params};

    fn pair_at(delta: f64) -> OptimalPair {
        OptimalPair {
            delta_opt: delta,
            lambda_opt: 1e-6,
            residual: 0.0,
            cavity: Cavity::One,
            g2_check: None,
            mechanism: Mechanism::Ucpb,
            proximity: None,
        }
    }

    /// Zeros of the printed c20/c02 found by a 1-D scan: the amplitude is affine in
    /// λ, `c = A(Δ) + λ B(Δ)`, so a real root needs `Im(A/B) = 0` and `λ = -Re(A/B)`.
    fn scan_oracle(p: &SystemParams, cavity: Cavity, grid: &SearchGrid, n: usize) -> Vec<(f64, f64)> {
        let ratio = |d: f64| {
            let a = printed_residual(d, 0.0, p, cavity).unwrap();
            let b = printed_residual(d, 1.0, p, cavity).unwrap() - a;
            a / b
        };
        let (lo, hi) = grid.delta_range;
        let mut out = Vec::new();
        let mut prev = (lo, ratio(lo));
        for k in 1..=n {
            let d = lo + (hi - lo) * k as f64 / n as f64;
            let cur = (d, ratio(d));
            if prev.1.im.signum() != cur.1.im.signum() {
                let (mut a, mut b) = (prev.0, cur.0);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if ratio(m).im.signum() == ratio(a).im.signum() {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                let d = 0.5 * (a + b);
                let r = ratio(d);
                let lam = -r.re;
                // sign flips through poles show up as huge |A/B|
                if grid.contains(d, lam) && r.im.abs() < 1e-9 * r.norm().max(1e-12) + 1e-18 {
                    out.push((d, lam));
                }
            }
            prev = cur;
        }
        out
    }

    #[test]
    fn drive_free_residual_is_pure_gain() {
        let p = weak_params().with_drive(0.0);
        let r = target_residual(1e-3, 1e-6, &p, Cavity::One).unwrap();
        assert!(r.norm() > 0.0);
        let r0 = target_residual(1e-3, 0.0, &p, Cavity::One).unwrap();
        assert_eq!(r0.norm(), 0.0);
    }

    #[test]
    fn coherent_residual_has_no_zero() {
        let p = SystemParams {
            hop_j: 0.0,
            g_om: 0.0,
            ..weak_params()
        };
        for delta in [-2e-3, 0.0, 3e-3] {
            let r = target_residual(delta, 0.0, &p, Cavity::One).unwrap();
            let lam = C64::new(delta, p.kappa / 2.0);
            let want = p.drive_e * p.drive_e / (std::f64::consts::SQRT_2 * lam * lam);
            assert!((r - want).norm() <= 1e-12 * want.norm());
        }
    }

    #[test]
    fn rounded_first_weak_pair_nearly_cancels() {
        let p = weak_params();
        let at = target_residual(-0.73e-4, 0.93e-6, &p, Cavity::One).unwrap();
        let off = target_residual(-0.73e-4, 0.0, &p, Cavity::One).unwrap();
        assert!(at.norm() <= 1e-2 * off.norm(), "{}", at.norm() / off.norm());
    }

    #[test]
    fn phases_rejected() {
        let p = SystemParams {
            phi: 0.3,
            ..weak_params()
        };
        assert!(target_residual(0.0, 0.0, &p, Cavity::One).is_err());
    }

    #[test]
    fn weak_roots_match_scan_oracle() {
        let p = weak_params();
        let grid = SearchGrid::weak_default();
        for cavity in [Cavity::One, Cavity::Two] {
            let roots = find_roots(&p, cavity, &grid).unwrap();
            let oracle = scan_oracle(&p, cavity, &grid, 4000);
            assert_eq!(roots.len(), oracle.len(), "{roots:?} vs {oracle:?}");
            assert!(roots.len() >= 3);
            for (r, (d, l)) in roots.iter().zip(&oracle) {
                assert!((r.delta - d).abs() <= 1e-9, "{r:?} vs {d}");
                assert!((r.lambda - l).abs() <= 1e-12 + 1e-6 * l.abs(), "{r:?} vs {l}");
                assert!(r.residual <= residual_tolerance(&p));
                let again = target_residual(r.delta, r.lambda, &p, cavity).unwrap();
                assert!(again.norm() <= residual_tolerance(&p));
            }
        }
    }

    #[test]
    fn first_weak_pair_recovered() {
        let roots = find_roots(&weak_params(), Cavity::One, &SearchGrid::weak_default()).unwrap();
        let (d0, l0) = (-0.73e-4, 0.93e-6);
        let near = roots
            .iter()
            .any(|r| (r.delta - d0).hypot(r.lambda - l0) <= 0.3 * d0.hypot(l0));
        assert!(near, "{roots:?}");
    }

    #[test]
    fn strong_roots_match_scan_oracle() {
        let p = strong_params();
        let grid = SearchGrid::strong_default();
        let roots = find_roots(&p, Cavity::One, &grid).unwrap();
        let oracle = scan_oracle(&p, Cavity::One, &grid, 24000);
        assert_eq!(roots.len(), oracle.len(), "{roots:?} vs {oracle:?}");
        assert!(roots.len() >= 4);
        assert!(roots.iter().any(|r| (r.delta - 0.024).abs() < 1e-3));
    }

    #[test]
    fn root_set_stable_under_refinement() {
        let p = weak_params();
        let grid = SearchGrid::weak_default();
        let coarse = find_roots(&p, Cavity::One, &grid).unwrap();
        let fine = find_roots(&p, Cavity::One, &grid.refined()).unwrap();
        assert_eq!(coarse.len(), fine.len());
        for (a, b) in coarse.iter().zip(&fine) {
            assert!((a.delta - b.delta).hypot(a.lambda - b.lambda) <= DEDUPE_DISTANCE);
        }
    }

    #[test]
    fn printed_and_solved_roots_agree() {
        let cmp = compare_printed_roots(&weak_params(), Cavity::Two, &SearchGrid::weak_default()).unwrap();
        assert!(!cmp.differs(), "{}", cmp.max_mismatch());
    }

    #[test]
    fn no_drive_no_pairs() {
        let p = weak_params().with_drive(0.0);
        assert!(find_optimal_pairs(&p, Cavity::One, &SearchGrid::weak_default())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn grid_validation() {
        assert!(SearchGrid::new((0.0, 1.0), (0.0, 1.0), 3, 4).is_err());
        assert!(SearchGrid::new((1.0, 0.0), (0.0, 1.0), 4, 4).is_err());
        assert!(SearchGrid::new((0.0, 1.0), (0.0, 1.0), 4, 4).is_ok());
    }

    #[test]
    fn mechanism_classification() {
        let strong = strong_params();
        assert_eq!(classify_mechanism(&pair_at(0.056), &strong).mechanism, Mechanism::Cpb);
        assert_eq!(classify_mechanism(&pair_at(0.024), &strong).mechanism, Mechanism::Cpb);
        assert_eq!(classify_mechanism(&pair_at(0.040), &strong).mechanism, Mechanism::Ucpb);
        assert_eq!(classify_mechanism(&pair_at(-0.73e-4), &weak_params()).mechanism, Mechanism::Ucpb);

        let degenerate = strong.with_hop(0.0);
        let c = classify_mechanism(&pair_at(degenerate.mu()), &degenerate);
        assert_eq!(c.mechanism, Mechanism::Cpb);
        assert!(c.proximity.is_none());

        // μ ± J only 2κ apart: both windows match
        let close = strong.with_hop(strong.kappa);
        let c = classify_mechanism(&pair_at(close.mu()), &close);
        assert_eq!(c.mechanism, Mechanism::Cpb);
        assert!(c.proximity.is_some());
    }

    #[test]
    fn pair_json_shape() {
        let mut pair = pair_at(0.056);
        pair.g2_check = Some(3e-4);
        pair.mechanism = Mechanism::Cpb;
        let v = serde_json::to_value(&pair).unwrap();
        for key in ["delta_opt", "lambda_opt", "residual", "cavity", "g2_check", "mechanism"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert_eq!(v["mechanism"], "CPB");
        assert_eq!(v["cavity"], "1");
    }
}
