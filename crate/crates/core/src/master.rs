//! Density-matrix evolution under the master equation
//! `ρ̇ = -i(Hρ - ρH†) + Σ_x R_x ρ R_x†`.

use nalgebra::DMatrix;

use crate::basis::{OperatorMatrix, Register, StateVector, Subspace, C64};
use crate::error::{Error, Result};
use crate::trajectory::JumpModel;

/// Largest dense effective register evolved by default.
pub const MAX_EFFECTIVE_DIM: usize = 64;
/// Largest Fock cutoff accepted for full-model master runs.
pub const MAX_FULL_N_MAX: usize = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(DMatrix<C64>);

impl DensityMatrix {
    /// Wraps and validates a matrix: Hermitian, unit trace, positive
    /// semidefinite to `1e-9`.
    pub fn new(m: DMatrix<C64>) -> Result<Self> {
        let rho = DensityMatrix(m);
        rho.validate()?;
        Ok(rho)
    }

    pub fn pure(state: &StateVector) -> Result<Self> {
        let psi = state.normalized()?;
        Ok(DensityMatrix(psi.amps() * psi.amps().adjoint()))
    }

    /// Equal mixture of the given states.
    pub fn mixture(states: &[StateVector]) -> Result<Self> {
        let Some(first) = states.first() else {
            return Err(Error::invalid("states", "mixture needs at least one state"));
        };
        let mut m = DMatrix::zeros(first.dim(), first.dim());
        for s in states {
            let psi = s.normalized()?;
            m += psi.amps() * psi.amps().adjoint();
        }
        Ok(DensityMatrix(m / C64::new(states.len() as f64, 0.0)))
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.0;
        if !m.is_square() {
            return Err(Error::invalid("rho", "density matrix must be square"));
        }
        let scale = m.norm().max(1.0);
        if (m - m.adjoint()).norm() > 1e-9 * scale {
            return Err(Error::invalid("rho", "density matrix is not Hermitian"));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
            return Err(Error::invalid("rho", format!("trace must be 1, got {tr}")));
        }
        let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
        let smallest = herm.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        if smallest < -1e-9 {
            return Err(Error::invalid("rho", format!("negative eigenvalue {smallest:e}")));
        }
        Ok(())
    }

    /// `[p_D, p_L, p_H]` of the in-cavity atom pair.
    pub fn populations(&self, register: &Register) -> [f64; 3] {
        let mut pops = [0.0; 3];
        for i in 0..self.dim() {
            let (j, k) = register.levels(i);
            if let Some(s) = Subspace::of_levels(j, k) {
                pops[s as usize] += self.0[(i, i)].re;
            }
        }
        pops
    }
}

/// Mean emission rate `tr(R† R ρ)` of one channel.
pub fn mean_intensity(rho: &DensityMatrix, reset: &OperatorMatrix) -> f64 {
    let r = &reset.matrix;
    (r.adjoint() * r * &rho.0).trace().re
}

fn liouvillian(h: &DMatrix<C64>, h_adj: &DMatrix<C64>, resets: &[(DMatrix<C64>, DMatrix<C64>)], rho: &DMatrix<C64>) -> DMatrix<C64> {
    let mi = C64::new(0.0, -1.0);
    let mut out = (h * rho - rho * h_adj) * mi;
    for (r, r_adj) in resets {
        out += r * rho * r_adj;
    }
    out
}

fn check_limits(model: &JumpModel) -> Result<()> {
    match model.register {
        Register::Effective(_) if model.dim() > MAX_EFFECTIVE_DIM => Err(Error::Capacity {
            dim: model.dim(),
            cap: MAX_EFFECTIVE_DIM,
        }),
        Register::Full(b) if b.n_max > MAX_FULL_N_MAX => Err(Error::invalid(
            "n_max",
            format!("full-model master evolution supports n_max <= {MAX_FULL_N_MAX}"),
        )),
        _ => Ok(()),
    }
}

/// Largest rate appearing in the model: the row-sum norm of `H` and of each `R†R`.
pub fn max_rate(model: &JumpModel) -> f64 {
    let row_sum = |m: &DMatrix<C64>| {
        (0..m.nrows())
            .map(|r| m.row(r).iter().map(|x| x.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let mut rate = row_sum(&model.hamiltonian.matrix);
    for r in &model.resets {
        rate = rate.max(row_sum(&(r.matrix.adjoint() * &r.matrix)));
    }
    rate
}

/// Evolves `rho` and returns it at each of the sorted `times` with fixed
/// fourth-order Runge–Kutta steps no longer than `dt`.
pub fn evolve_master_series(rho: &DensityMatrix, model: &JumpModel, times: &[f64], dt: f64) -> Result<Vec<DensityMatrix>> {
    check_limits(model)?;
    if rho.dim() != model.dim() {
        return Err(Error::invalid("rho", "dimension does not match the model"));
    }
    let limit = 0.1 / max_rate(model).max(f64::MIN_POSITIVE);
    if !(dt > 0.0 && dt <= limit) {
        return Err(Error::invalid("dt", format!("must lie in (0, {limit:e}], got {dt}")));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::invalid("times", "must be sorted and >= 0"));
    }
    let h = &model.hamiltonian.matrix;
    let h_adj = h.adjoint();
    let resets: Vec<_> = model.resets.iter().map(|r| (r.matrix.clone(), r.matrix.adjoint())).collect();
    let f = |m: &DMatrix<C64>| liouvillian(h, &h_adj, &resets, m);

    let initial_trace = rho.trace();
    let mut current = rho.0.clone();
    let mut now = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        let span = t - now;
        let n = (span / dt).ceil() as u64;
        if n > 0 {
            let step = span / n as f64;
            let (half, full, sixth) = (C64::new(0.5 * step, 0.0), C64::new(step, 0.0), C64::new(step / 6.0, 0.0));
            for _ in 0..n {
                let k1 = f(&current);
                let k2 = f(&(&current + &k1 * half));
                let k3 = f(&(&current + &k2 * half));
                let k4 = f(&(&current + &k3 * full));
                current += (k1 + (k2 + k3) * C64::new(2.0, 0.0) + k4) * sixth;
            }
        }
        now = t;
        let drift = (current.trace().re - initial_trace).abs();
        if drift > 1e-8 {
            return Err(Error::TraceDrift(drift));
        }
        out.push(DensityMatrix(current.clone()));
    }
    Ok(out)
}

/// Evolves `rho` for time `t`.
pub fn evolve_master(rho: &DensityMatrix, model: &JumpModel, t: f64, dt: f64) -> Result<DensityMatrix> {
    let mut series = evolve_master_series(rho, model, &[t], dt)?;
    Ok(series.remove(0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effective::{effective_rates, EffectiveRates};
    use crate::model::EmitterResolution;
    use crate::params::SystemParams;
    use approx::assert_relative_eq;

    fn rates(gamma: f64) -> EffectiveRates {
        effective_rates(&SystemParams::symmetric(1.0, 1.0, 50.0, gamma, gamma)).unwrap()
    }

    fn model(gamma: f64) -> JumpModel {
        JumpModel::effective(&rates(gamma), 0, EmitterResolution::PerAtom).unwrap()
    }

    fn dt(m: &JumpModel) -> f64 {
        0.1 / max_rate(m)
    }

    #[test]
    fn dark_state_is_stationary() {
        let m = model(0.05);
        let rho = DensityMatrix::pure(&StateVector::basis(4, 0)).unwrap();
        let out = evolve_master(&rho, &m, 1e4, dt(&m)).unwrap();
        assert!((out.matrix() - rho.matrix()).norm() < 1e-12);
        assert_eq!(mean_intensity(&rho, m.cavity_reset().unwrap()), 0.0);
    }

    #[test]
    fn doubly_bright_state_without_atomic_decay() {
        let m = model(0.0);
        let rho = DensityMatrix::pure(&StateVector::basis(4, 3)).unwrap();
        let out = evolve_master(&rho, &m, 2e4, dt(&m)).unwrap();
        assert!((out.matrix() - rho.matrix()).norm() < 1e-10);
        let k = rates(0.0).kappa_eff;
        assert_relative_eq!(mean_intensity(&out, m.cavity_reset().unwrap()), 4.0 * k, max_relative = 1e-9);
    }

    #[test]
    fn intensity_is_linear() {
        let m = model(0.05);
        let rho = DensityMatrix::mixture(&[StateVector::basis(4, 1), StateVector::basis(4, 2)]).unwrap();
        assert_relative_eq!(mean_intensity(&rho, m.cavity_reset().unwrap()), rates(0.05).kappa_eff, max_relative = 1e-12);
    }

    #[test]
    fn trace_is_preserved() {
        let r = rates(0.1);
        let m = JumpModel::effective(&r, 0, EmitterResolution::PerAtom).unwrap();
        let psi = StateVector::from_vec(vec![
            C64::new(0.3, 0.1),
            C64::new(-0.5, 0.2),
            C64::new(0.1, 0.6),
            C64::new(0.4, -0.2),
        ]);
        let rho = DensityMatrix::pure(&psi).unwrap();
        let out = evolve_master(&rho, &m, 10.0 / r.kappa_eff, dt(&m)).unwrap();
        assert!((out.trace() - 1.0).abs() < 1e-8);
        out.validate().unwrap();
    }

    #[test]
    fn rejects_large_step_and_invalid_states() {
        let m = model(0.05);
        let rho = DensityMatrix::pure(&StateVector::basis(4, 0)).unwrap();
        assert!(evolve_master(&rho, &m, 1.0, 10.0 * dt(&m)).is_err());
        let bad = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
            C64::new(1.5, 0.0),
            C64::new(-0.5, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
        ]));
        assert!(DensityMatrix::new(bad).is_err());
    }

    #[test]
    fn full_model_cutoff_is_gated() {
        let p = SystemParams::symmetric(1.0, 1.0, 50.0, 0.1, 0.1);
        let full = JumpModel::full(&p, 0, EmitterResolution::PerAtom).unwrap();
        let rho = DensityMatrix::pure(&StateVector::basis(full.dim(), 0)).unwrap();
        assert!(evolve_master(&rho, &full, 1.0, 1e-4).is_err());
    }
}
