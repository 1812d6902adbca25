//! LTI plant model, the sensor's local Kalman filter and the remote estimator.
//!
//! The remote error covariance only ever takes values on the ladder
//! `P̄, h(P̄), h²(P̄), …` where `h(X) = A X Aᵀ + Q` and `P̄` is the fixed point
//! of `g̃ ∘ h` with `g̃(X) = X − X Cᵀ (C X Cᵀ + R)⁻¹ C X`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{self, check_square, clean_psd};

pub const DEFAULT_STEADY_TOL: f64 = 1e-12;
pub const DEFAULT_STEADY_MAX_ITER: usize = 1_000_000;

/// Linear time-invariant plant `x⁺ = A x + w`, `y = C x + v`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemModel {
    a: DMatrix<f64>,
    c: DMatrix<f64>,
    q: DMatrix<f64>,
    r: DMatrix<f64>,
    pi0: DMatrix<f64>,
}

impl SystemModel {
    /// Builds a model and checks every standing assumption: PSD noise
    /// covariances, `R` positive definite, `(A, C)` observable and
    /// `(A, Q^{1/2})` controllable.
    pub fn new(
        a: DMatrix<f64>,
        c: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        pi0: DMatrix<f64>,
    ) -> Result<Self> {
        let model = Self::new_relaxed(a, c, q, r, pi0)?;
        model.check_structure()?;
        Ok(model)
    }

    /// Same as [`SystemModel::new`] without the observability and
    /// controllability rank tests. Degenerate plants (zero process noise,
    /// zero dynamics) are useful for limit cases.
    pub fn new_relaxed(
        a: DMatrix<f64>,
        c: DMatrix<f64>,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        pi0: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        if n == 0 {
            return Err(Error::param("A", "state dimension must be at least 1"));
        }
        check_square(&a, n, "A")?;
        if c.ncols() != n || c.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                context: "C",
                expected: (c.nrows().max(1), n),
                actual: c.shape(),
            });
        }
        let m = c.nrows();
        check_square(&q, n, "Q")?;
        check_square(&r, m, "R")?;
        check_square(&pi0, n, "Pi0")?;

        let q = clean_psd(q, "Q")?;
        let pi0 = clean_psd(pi0, "Pi0")?;
        let r = linalg::symmetrize(&r);
        let r_min = linalg::min_eigenvalue(&r);
        if r_min <= 0.0 {
            return Err(Error::NotPd {
                name: "R",
                min_eigenvalue: r_min,
            });
        }
        Ok(Self { a, c, q, r, pi0 })
    }

    /// Scalar plant helper.
    pub fn scalar(a: f64, c: f64, q: f64, r: f64, pi0: f64) -> Result<Self> {
        let m = |v| DMatrix::from_element(1, 1, v);
        Self::new(m(a), m(c), m(q), m(r), m(pi0))
    }

    fn check_structure(&self) -> Result<()> {
        let n = self.state_dim();
        let mut blocks = Vec::with_capacity(n);
        let mut power = DMatrix::identity(n, n);
        for _ in 0..n {
            blocks.push(&self.c * &power);
            power = &power * &self.a;
        }
        let obs = stack_rows(&blocks);
        let rank = linalg::numerical_rank(&obs);
        if rank < n {
            return Err(Error::NotObservable { rank, dim: n });
        }

        let q_half = linalg::psd_sqrt(&self.q);
        let mut cols = Vec::with_capacity(n);
        let mut power = DMatrix::identity(n, n);
        for _ in 0..n {
            cols.push(&power * &q_half);
            power = &power * &self.a;
        }
        let ctrb = stack_cols(&cols);
        let rank = linalg::numerical_rank(&ctrb);
        if rank < n {
            return Err(Error::NotControllable { rank, dim: n });
        }
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn pi0(&self) -> &DMatrix<f64> {
        &self.pi0
    }

    /// `h(X) = A X Aᵀ + Q`.
    pub fn lyapunov_step(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_square(x, self.state_dim(), "lyapunov_step input")?;
        if !linalg::is_psd(x) {
            return Err(Error::NotPsd {
                name: "lyapunov_step input",
                min_eigenvalue: linalg::min_eigenvalue(x),
            });
        }
        Ok(self.lyapunov_unchecked(x))
    }

    fn lyapunov_unchecked(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        linalg::symmetrize(&(&self.a * x * self.a.transpose() + &self.q))
    }

    /// `g̃(X) = X − X Cᵀ (C X Cᵀ + R)⁻¹ C X`.
    pub fn riccati_reduce(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        check_square(x, self.state_dim(), "riccati_reduce input")?;
        self.riccati_unchecked(x)
    }

    fn riccati_unchecked(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let xct = x * self.c.transpose();
        let s = &self.c * &xct + &self.r;
        let chol = linalg::symmetrize(&s).cholesky().ok_or(Error::NotPd {
            name: "C X Cᵀ + R",
            min_eigenvalue: linalg::min_eigenvalue(&s),
        })?;
        // (C X Cᵀ + R)⁻¹ C X
        let gain_t = chol.solve(&xct.transpose());
        clean_psd(x - &xct * gain_t, "riccati_reduce output")
    }

    /// Fixed point of `g̃ ∘ h` reached by iterating from `Pi0`.
    ///
    /// Stops once `‖g̃(h(X)) − X‖_F ≤ tol · (1 + ‖X‖_F)`.
    pub fn steady_state_covariance(&self, tol: f64, max_iter: usize) -> Result<DMatrix<f64>> {
        if !(tol > 0.0) {
            return Err(Error::param("tol", "must be positive"));
        }
        let mut x = self.pi0.clone();
        let mut residual = f64::INFINITY;
        for _ in 0..max_iter {
            let next = self.riccati_unchecked(&self.lyapunov_unchecked(&x))?;
            residual = (&next - &x).norm();
            let scale = 1.0 + next.norm();
            x = next;
            if residual <= tol * scale {
                return Ok(x);
            }
            if !residual.is_finite() {
                break;
            }
        }
        Err(Error::NoConvergence {
            what: "steady-state covariance",
            iterations: max_iter,
            residual,
        })
    }

    pub fn steady_state(&self) -> Result<DMatrix<f64>> {
        self.steady_state_covariance(DEFAULT_STEADY_TOL, DEFAULT_STEADY_MAX_ITER)
    }

    /// One step of the local Kalman filter: time update, gain, measurement
    /// update. Returns the new estimate and error covariance.
    pub fn local_filter_step(
        &self,
        prev_estimate: &DVector<f64>,
        prev_cov: &DMatrix<f64>,
        measurement: &DVector<f64>,
    ) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let n = self.state_dim();
        if prev_estimate.len() != n {
            return Err(Error::DimensionMismatch {
                context: "filter estimate",
                expected: (n, 1),
                actual: (prev_estimate.len(), 1),
            });
        }
        if measurement.len() != self.output_dim() {
            return Err(Error::DimensionMismatch {
                context: "measurement",
                expected: (self.output_dim(), 1),
                actual: (measurement.len(), 1),
            });
        }
        check_square(prev_cov, n, "filter covariance")?;

        let x_pred = &self.a * prev_estimate;
        let p_pred = self.lyapunov_unchecked(prev_cov);
        let s = &self.c * &p_pred * self.c.transpose() + &self.r;
        let chol = linalg::symmetrize(&s).cholesky().ok_or(Error::NotPd {
            name: "innovation covariance",
            min_eigenvalue: linalg::min_eigenvalue(&s),
        })?;
        let gain = chol.solve(&(&self.c * &p_pred)).transpose();
        let innovation = measurement - &self.c * &x_pred;
        let estimate = &x_pred + &gain * innovation;
        let cov = (DMatrix::identity(n, n) - &gain * &self.c) * &p_pred;
        Ok((estimate, clean_psd(cov, "filter covariance")?))
    }
}

fn stack_rows(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let cols = blocks[0].ncols();
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, 0), b.shape()).copy_from(b);
        at += b.nrows();
    }
    out
}

fn stack_cols(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows = blocks[0].nrows();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((0, at), b.shape()).copy_from(b);
        at += b.ncols();
    }
    out
}

/// The remote covariances `h^t(P̄)` for `t = 0..=depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceLadder {
    rungs: Vec<DMatrix<f64>>,
    traces: Vec<f64>,
}

impl CovarianceLadder {
    pub fn build(model: &SystemModel, depth: usize) -> Result<Self> {
        let steady = model.steady_state()?;
        Self::from_steady(model, steady, depth)
    }

    /// Builds the ladder from an already computed steady-state covariance.
    pub fn from_steady(model: &SystemModel, steady: DMatrix<f64>, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(Error::param("depth", "ladder depth must be at least 1"));
        }
        check_square(&steady, model.state_dim(), "steady-state covariance")?;
        let mut rungs = Vec::with_capacity(depth + 1);
        rungs.push(steady);
        for t in 0..depth {
            let next = model.lyapunov_unchecked(&rungs[t]);
            rungs.push(next);
        }
        let traces = rungs.iter().map(|r| r.trace()).collect();
        Ok(Self { rungs, traces })
    }

    /// Number of climbs represented, so rungs are indexed `0..=depth()`.
    pub fn depth(&self) -> usize {
        self.rungs.len() - 1
    }

    pub fn steady(&self) -> &DMatrix<f64> {
        &self.rungs[0]
    }

    pub fn rung(&self, t: usize) -> &DMatrix<f64> {
        &self.rungs[t]
    }

    pub fn rungs(&self) -> &[DMatrix<f64>] {
        &self.rungs
    }

    pub fn trace(&self, t: usize) -> f64 {
        self.traces[t]
    }

    pub fn traces(&self) -> &[f64] {
        &self.traces
    }

    pub fn strictly_increasing(&self) -> bool {
        self.traces.windows(2).all(|w| w[1] > w[0])
    }
}

/// Remote error covariance after one step: `P̄` on arrival, `h(prev)` on a drop.
pub fn remote_update(
    prev_remote_cov: &DMatrix<f64>,
    arrival: bool,
    model: &SystemModel,
    steady: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    if arrival {
        Ok(steady.clone())
    } else {
        model.lyapunov_step(prev_remote_cov)
    }
}

/// Remote estimator state: copies the sensor's estimate when a packet
/// arrives and predicts with the plant model otherwise.
#[derive(Debug, Clone)]
pub struct RemoteEstimator {
    pub estimate: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl RemoteEstimator {
    pub fn new(estimate: DVector<f64>, covariance: DMatrix<f64>) -> Self {
        Self {
            estimate,
            covariance,
        }
    }

    pub fn update(
        &mut self,
        model: &SystemModel,
        steady: &DMatrix<f64>,
        local_estimate: &DVector<f64>,
        arrival: bool,
    ) -> Result<()> {
        if arrival {
            self.estimate.copy_from(local_estimate);
        } else {
            self.estimate = model.a() * &self.estimate;
        }
        self.covariance = remote_update(&self.covariance, arrival, model, steady)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn m1(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn reference() -> SystemModel {
        SystemModel::scalar(0.9, 0.7, 0.8, 0.8, 1.0).unwrap()
    }

    // Positive root of 0.3969 X² + 0.544 X − 0.64 = 0, the scalar fixed
    // point of g̃ ∘ h with A=0.9, C=0.7, Q=R=0.8.
    fn quadratic_root() -> f64 {
        let (a, b, c) = (0.3969_f64, 0.544_f64, -0.64_f64);
        (-b + (b * b - 4.0 * a * c).sqrt()) / (2.0 * a)
    }

    #[test]
    fn lyapunov_scalar() {
        let model = reference();
        assert_relative_eq!(model.lyapunov_step(&m1(1.0)).unwrap()[(0, 0)], 1.61, epsilon = 1e-15);
        let hp = model.lyapunov_step(&m1(0.757654)).unwrap()[(0, 0)];
        assert!((hp - 1.413700).abs() < 1e-5);
    }

    #[test]
    fn lyapunov_zero_dynamics_returns_q() {
        let q = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let model = SystemModel::new_relaxed(
            DMatrix::zeros(2, 2),
            DMatrix::identity(2, 2),
            q.clone(),
            DMatrix::identity(2, 2),
            DMatrix::identity(2, 2),
        )
        .unwrap();
        let x = DMatrix::from_row_slice(2, 2, &[5.0, 1.0, 1.0, 3.0]);
        assert_relative_eq!(model.lyapunov_step(&x).unwrap(), q, epsilon = 1e-15);
    }

    #[test]
    fn lyapunov_rejects_bad_input() {
        let model = reference();
        assert!(matches!(
            model.lyapunov_step(&DMatrix::zeros(2, 2)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(model.lyapunov_step(&m1(-1.0)), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn riccati_scalar_and_degenerate() {
        let model = reference();
        assert_relative_eq!(
            model.riccati_reduce(&m1(1.0)).unwrap()[(0, 0)],
            1.0 - 0.49 / 1.29,
            epsilon = 1e-15
        );
        assert_eq!(model.riccati_reduce(&m1(0.0)).unwrap()[(0, 0)], 0.0);

        let blind = SystemModel::new_relaxed(m1(0.9), m1(0.0), m1(0.8), m1(0.8), m1(1.0)).unwrap();
        assert_relative_eq!(blind.riccati_reduce(&m1(2.5)).unwrap()[(0, 0)], 2.5, epsilon = 1e-15);
    }

    #[test]
    fn steady_state_matches_quadratic_root() {
        let root = quadratic_root();
        assert!((root - 0.757654).abs() < 1e-6);
        let p = reference().steady_state().unwrap();
        assert!((p[(0, 0)] - root).abs() < 1e-10);
    }

    #[test]
    fn steady_state_limit_cases() {
        let zero_dyn = SystemModel::new_relaxed(m1(0.0), m1(0.7), m1(0.8), m1(0.8), m1(1.0)).unwrap();
        let p = zero_dyn.steady_state().unwrap();
        let expected = zero_dyn.riccati_reduce(&m1(0.8)).unwrap();
        assert_relative_eq!(p, expected, epsilon = 1e-12);

        let noiseless = SystemModel::new_relaxed(m1(0.5), m1(0.7), m1(0.0), m1(0.8), m1(0.0)).unwrap();
        assert_eq!(noiseless.steady_state().unwrap()[(0, 0)], 0.0);
    }

    #[test]
    fn steady_state_reports_non_convergence() {
        let err = reference().steady_state_covariance(1e-12, 2).unwrap_err();
        assert!(matches!(err, Error::NoConvergence { .. }));
    }

    #[test]
    fn ladder_scalar_values() {
        let ladder = CovarianceLadder::build(&reference(), 2).unwrap();
        let root = quadratic_root();
        let expected = [root, 0.81 * root + 0.8, 0.81 * (0.81 * root + 0.8) + 0.8];
        for (t, e) in expected.iter().enumerate() {
            assert!((ladder.trace(t) - e).abs() < 1e-10);
        }
        assert!((ladder.trace(2) - 1.945097).abs() < 1e-6);
        assert!(ladder.strictly_increasing());
    }

    #[test]
    fn ladder_zero_dynamics() {
        let model = SystemModel::new_relaxed(m1(0.0), m1(0.7), m1(0.8), m1(0.8), m1(1.0)).unwrap();
        let ladder = CovarianceLadder::build(&model, 1).unwrap();
        assert_relative_eq!(ladder.rung(1)[(0, 0)], 0.8, epsilon = 1e-15);
        assert_relative_eq!(
            ladder.rung(0)[(0, 0)],
            model.riccati_reduce(&m1(0.8)).unwrap()[(0, 0)],
            epsilon = 1e-12
        );
    }

    #[test]
    fn filter_step_fixed_point_and_zero_innovation() {
        let model = reference();
        let p_bar = model.steady_state().unwrap();
        let x = DVector::from_element(1, 2.0);
        let y = model.c() * model.a() * &x;
        let (est, cov) = model.local_filter_step(&x, &p_bar, &y).unwrap();
        assert_relative_eq!(cov, p_bar, epsilon = 1e-10);
        assert_relative_eq!(est, model.a() * &x, epsilon = 1e-14);
    }

    #[test]
    fn filter_step_from_unit_covariance() {
        // g̃(h(1)) = 0.8·1.61 / (0.49·1.61 + 0.8) for the scalar reference plant.
        let oracle: f64 = 0.8 * 1.61 / (0.49 * 1.61 + 0.8);
        assert!((oracle - 0.8106237019321545).abs() < 1e-15);
        let model = reference();
        let (_, cov) = model
            .local_filter_step(&DVector::zeros(1), &m1(1.0), &DVector::zeros(1))
            .unwrap();
        assert_relative_eq!(cov[(0, 0)], oracle, epsilon = 1e-14);
    }

    #[test]
    fn remote_update_branches() {
        let model = reference();
        let ladder = CovarianceLadder::build(&model, 2).unwrap();
        let p_bar = ladder.steady();
        let any = m1(7.0);
        assert_eq!(&remote_update(&any, true, &model, p_bar).unwrap(), p_bar);
        let h1 = remote_update(p_bar, false, &model, p_bar).unwrap();
        assert_relative_eq!(&h1, ladder.rung(1), epsilon = 1e-15);
        let h2 = remote_update(&h1, false, &model, p_bar).unwrap();
        assert_relative_eq!(&h2, ladder.rung(2), epsilon = 1e-15);
    }

    #[test]
    fn structural_checks() {
        // Unobservable: C blind to the second state which is decoupled.
        let a = DMatrix::from_row_slice(2, 2, &[0.9, 0.0, 0.0, 0.5]);
        let c = DMatrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let err = SystemModel::new(
            a.clone(),
            c,
            DMatrix::identity(2, 2),
            m1(1.0),
            DMatrix::identity(2, 2),
        )
        .unwrap_err();
        assert!(matches!(err, Error::NotObservable { .. }));

        let err = SystemModel::scalar(0.9, 0.7, 0.0, 0.8, 1.0).unwrap_err();
        assert!(matches!(err, Error::NotControllable { .. }));

        let err = SystemModel::scalar(0.9, 0.7, 0.8, 0.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::NotPd { .. }));
    }
}
