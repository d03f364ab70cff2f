//! Device setups for the CHSH test and the certification chain from the
//! observed violation to the absolute effective anticommutator.
//!
//! A [`DeviceSetup`] is a bipartite state plus two binary observables per
//! side. From it we compute the CHSH value `beta = tr(W rho)` and the
//! absolute effective anticommutator `eps_plus = tr(|{A0,A1}| rho_A) / 2`,
//! and check the trade-off `|beta| <= 2 sqrt(1 + sqrt(1 - eps_plus^2))`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{
    anticommutator, operator_abs, partial_trace_raw, ComplexMatrix, DensityMatrix,
    HermitianOperator, Keep,
};
use crate::rng;

/// Largest CHSH value any quantum setup can reach.
pub const CHSH_MAX: f64 = 2.0 * std::f64::consts::SQRT_2;

pub fn pauli_x() -> HermitianOperator {
    HermitianOperator::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).expect("static")
}

pub fn pauli_y() -> HermitianOperator {
    let mut m = ComplexMatrix::zeros(2);
    m.set(0, 1, Complex64::new(0.0, -1.0));
    m.set(1, 0, Complex64::new(0.0, 1.0));
    HermitianOperator::new(m).expect("static")
}

pub fn pauli_z() -> HermitianOperator {
    HermitianOperator::diag(&[1.0, -1.0])
}

/// Maximally entangled two-qubit state `(|00> + |11>)/sqrt(2)`.
pub fn phi_plus() -> DensityMatrix {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    DensityMatrix::from_pure(&[
        Complex64::new(a, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(0.0, 0.0),
        Complex64::new(a, 0.0),
    ])
    .expect("static")
}

/// Qubit observable `r . sigma` for a Bloch vector with `|r| <= 1`.
pub fn bloch_observable(x: f64, y: f64, z: f64) -> Result<HermitianOperator> {
    let norm = (x * x + y * y + z * z).sqrt();
    if norm > 1.0 + 1e-9 {
        return Err(Error::Domain(format!("Bloch vector norm {norm} exceeds 1")));
    }
    let mut m = ComplexMatrix::zeros(2);
    m.set(0, 0, Complex64::new(z, 0.0));
    m.set(1, 1, Complex64::new(-z, 0.0));
    m.set(0, 1, Complex64::new(x, -y));
    m.set(1, 0, Complex64::new(x, y));
    HermitianOperator::new(m)
}

/// Bipartite state plus two binary observables per side.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "SetupRepr", into = "SetupRepr")]
pub struct DeviceSetup {
    dim_a: usize,
    dim_b: usize,
    rho: DensityMatrix,
    a0: HermitianOperator,
    a1: HermitianOperator,
    b0: HermitianOperator,
    b1: HermitianOperator,
}

#[derive(Serialize, Deserialize)]
struct SetupRepr {
    dim_a: usize,
    dim_b: usize,
    rho: DensityMatrix,
    a0: HermitianOperator,
    a1: HermitianOperator,
    b0: HermitianOperator,
    b1: HermitianOperator,
}

impl From<DeviceSetup> for SetupRepr {
    fn from(s: DeviceSetup) -> Self {
        SetupRepr {
            dim_a: s.dim_a,
            dim_b: s.dim_b,
            rho: s.rho,
            a0: s.a0,
            a1: s.a1,
            b0: s.b0,
            b1: s.b1,
        }
    }
}

impl TryFrom<SetupRepr> for DeviceSetup {
    type Error = Error;

    fn try_from(r: SetupRepr) -> Result<Self> {
        DeviceSetup::new(r.dim_a, r.dim_b, r.rho, r.a0, r.a1, r.b0, r.b1)
    }
}

impl DeviceSetup {
    pub fn new(
        dim_a: usize,
        dim_b: usize,
        rho: DensityMatrix,
        a0: HermitianOperator,
        a1: HermitianOperator,
        b0: HermitianOperator,
        b1: HermitianOperator,
    ) -> Result<Self> {
        if rho.dim() != dim_a * dim_b {
            return Err(Error::DimensionMismatch(format!(
                "state dim {} != {dim_a} * {dim_b}",
                rho.dim()
            )));
        }
        for (name, op, want) in [
            ("A0", &a0, dim_a),
            ("A1", &a1, dim_a),
            ("B0", &b0, dim_b),
            ("B1", &b1, dim_b),
        ] {
            if op.dim() != want {
                return Err(Error::DimensionMismatch(format!(
                    "observable {name} has dim {}, expected {want}",
                    op.dim()
                )));
            }
            let norm = op.operator_norm();
            if norm > 1.0 + 1e-12 {
                return Err(Error::Domain(format!(
                    "observable {name} has operator norm {norm} > 1"
                )));
            }
        }
        Ok(DeviceSetup {
            dim_a,
            dim_b,
            rho,
            a0,
            a1,
            b0,
            b1,
        })
    }

    pub fn dim_a(&self) -> usize {
        self.dim_a
    }

    pub fn dim_b(&self) -> usize {
        self.dim_b
    }

    pub fn rho(&self) -> &DensityMatrix {
        &self.rho
    }

    pub fn a(&self, setting: u8) -> &HermitianOperator {
        if setting == 0 {
            &self.a0
        } else {
            &self.a1
        }
    }

    pub fn b(&self, setting: u8) -> &HermitianOperator {
        if setting == 0 {
            &self.b0
        } else {
            &self.b1
        }
    }

    /// Alice's reduced state.
    pub fn rho_a(&self) -> DensityMatrix {
        let m = partial_trace_raw(self.rho.matrix(), self.dim_a, self.dim_b, Keep::A)
            .expect("dims validated");
        DensityMatrix::new(HermitianOperator::new(m).expect("partial trace is Hermitian"))
            .expect("partial trace preserves positivity and trace")
    }
}

/// `W = A0 (x) B0 + A0 (x) B1 + A1 (x) B0 - A1 (x) B1`.
pub fn chsh_operator(setup: &DeviceSetup) -> HermitianOperator {
    let t00 = setup.a0.matrix().tensor(setup.b0.matrix());
    let t01 = setup.a0.matrix().tensor(setup.b1.matrix());
    let t10 = setup.a1.matrix().tensor(setup.b0.matrix());
    let t11 = setup.a1.matrix().tensor(setup.b1.matrix());
    let w = t00
        .add(&t01)
        .and_then(|m| m.add(&t10))
        .and_then(|m| m.sub(&t11))
        .expect("equal dims by construction");
    HermitianOperator::new(w).expect("sum of Hermitian tensor products")
}

/// CHSH value `beta = tr(W rho_AB)`.
pub fn chsh_value(setup: &DeviceSetup) -> f64 {
    chsh_operator(setup)
        .expectation(setup.rho.matrix())
        .expect("dims validated")
}

/// CHSH game winning probability `1/2 + beta/8`.
pub fn winning_probability(beta: f64) -> Result<f64> {
    if beta.abs() > CHSH_MAX + 1e-9 {
        return Err(Error::Domain(format!(
            "|beta| = {} exceeds the quantum maximum 2*sqrt(2)",
            beta.abs()
        )));
    }
    Ok(0.5 + beta / 8.0)
}

/// Effective anticommutator `tr({A0,A1} rho_A) / 2` (signed, not absolute).
pub fn effective_anticommutator(
    a0: &HermitianOperator,
    a1: &HermitianOperator,
    rho_a: &DensityMatrix,
) -> Result<f64> {
    let acom = anticommutator(a0, a1)?;
    Ok(acom.expectation(rho_a.matrix())? / 2.0)
}

/// Absolute effective anticommutator `tr(|{A0,A1}| rho_A) / 2`, clamped to
/// `[0, 1]` so downstream formulas taking `sqrt(1 - eps^2)` stay real.
pub fn absolute_effective_anticommutator(
    a0: &HermitianOperator,
    a1: &HermitianOperator,
    rho_a: &DensityMatrix,
) -> Result<f64> {
    let acom = anticommutator(a0, a1)?;
    let abs = operator_abs(&acom);
    let raw = abs.expectation(rho_a.matrix())? / 2.0;
    Ok(raw.clamp(0.0, 1.0))
}

/// Certification report for one setup.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChshReport {
    pub beta: f64,
    pub eps_plus: f64,
    /// `2 sqrt(1 + sqrt(1 - eps_plus^2))`
    pub bound_rhs: f64,
    /// `bound_rhs - |beta|`; nonnegative up to numerical noise
    pub slack: f64,
    /// true when the bound is met with slack below 1e-6
    pub saturated: bool,
}

/// Evaluate both sides of the violation-vs-anticommutator bound.
pub fn verify_beta_eps_bound(setup: &DeviceSetup) -> Result<ChshReport> {
    let beta = chsh_value(setup);
    let eps_plus = absolute_effective_anticommutator(&setup.a0, &setup.a1, &setup.rho_a())?;
    let bound_rhs = 2.0 * (1.0 + (1.0 - eps_plus * eps_plus).max(0.0).sqrt()).sqrt();
    let slack = bound_rhs - beta.abs();
    Ok(ChshReport {
        beta,
        eps_plus,
        bound_rhs,
        slack,
        saturated: slack <= 1e-6,
    })
}

/// The ideal specification: EPR pair, `A0 = sigma_z`, `A1 = sigma_x`,
/// `B0 = (sigma_z + sigma_x)/sqrt(2)`, `B1 = (sigma_z - sigma_x)/sqrt(2)`.
pub fn ideal_setup() -> DeviceSetup {
    let a = std::f64::consts::FRAC_1_SQRT_2;
    DeviceSetup::new(
        2,
        2,
        phi_plus(),
        pauli_z(),
        pauli_x(),
        bloch_observable(a, 0.0, a).expect("static"),
        bloch_observable(-a, 0.0, a).expect("static"),
    )
    .expect("static")
}

/// Rank-1 qubit setup saturating the bound: `A0 = sigma_z`,
/// `A1 = cos(theta) sigma_z + sin(theta) sigma_x` on the EPR pair, with
/// Bob's observables along the (normalized) sum and difference of Alice's
/// Bloch vectors. Yields `eps_plus = cos(theta)` and
/// `beta = 2 sqrt(1 + sin(theta))`.
pub fn saturating_setup(theta: f64) -> Result<DeviceSetup> {
    if !(theta > 0.0 && theta <= std::f64::consts::FRAC_PI_2) {
        return Err(Error::Domain(format!("theta = {theta} outside (0, pi/2]")));
    }
    let a0 = [0.0, 0.0, 1.0];
    let a1 = [theta.sin(), 0.0, theta.cos()];
    let sum = [a0[0] + a1[0], 0.0, a0[2] + a1[2]];
    let diff = [a0[0] - a1[0], 0.0, a0[2] - a1[2]];
    let ns = (sum[0] * sum[0] + sum[2] * sum[2]).sqrt();
    let nd = (diff[0] * diff[0] + diff[2] * diff[2]).sqrt();
    DeviceSetup::new(
        2,
        2,
        phi_plus(),
        pauli_z(),
        bloch_observable(a1[0], 0.0, a1[2])?,
        bloch_observable(sum[0] / ns, 0.0, sum[2] / ns)?,
        bloch_observable(diff[0] / nd, 0.0, diff[2] / nd)?,
    )
}

/// Haar-ish random qubit setup: Ginibre random two-qubit state and uniformly
/// random projective Bloch observables on each side.
pub fn random_qubit_setup(rng: &mut rng::Stream) -> DeviceSetup {
    let rho = random_density(4, rng);
    let a0 = random_bloch_observable(rng);
    let a1 = random_bloch_observable(rng);
    let b0 = random_bloch_observable(rng);
    let b1 = random_bloch_observable(rng);
    DeviceSetup::new(2, 2, rho, a0, a1, b0, b1).expect("generated within domain")
}

/// Random density matrix from the Ginibre ensemble: `G G^dag / tr`.
pub fn random_density(dim: usize, rng: &mut rng::Stream) -> DensityMatrix {
    let mut g = ComplexMatrix::zeros(dim);
    for i in 0..dim {
        for j in 0..dim {
            g.set(i, j, Complex64::new(normal(rng), normal(rng)));
        }
    }
    let gg = g.mul(&g.adjoint()).expect("same dim");
    let trace = gg.trace().re;
    let rho = gg.scale(Complex64::new(1.0 / trace, 0.0));
    DensityMatrix::new(HermitianOperator::new(rho).expect("G G^dag is Hermitian"))
        .expect("Ginibre construction is a state")
}

pub fn random_bloch_observable(rng: &mut rng::Stream) -> HermitianOperator {
    loop {
        let (x, y, z) = (normal(rng), normal(rng), normal(rng));
        let n = (x * x + y * y + z * z).sqrt();
        if n > 1e-9 {
            return bloch_observable(x / n, y / n, z / n).expect("unit Bloch vector");
        }
    }
}

fn normal(rng: &mut rng::Stream) -> f64 {
    // Box-Muller from two uniforms.
    use rand::Rng;
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Two-outcome POVM `{(1 + A)/2, (1 - A)/2}` of a binary observable; index 0
/// is the +1 outcome.
pub fn observable_povm(a: &HermitianOperator) -> [HermitianOperator; 2] {
    let id = HermitianOperator::identity(a.dim());
    [
        id.add(a).expect("same dim").scale(0.5),
        id.sub(a).expect("same dim").scale(0.5),
    ]
}

/// Joint outcome law `p[i][j] = tr[(E_i (x) F_j) rho]` for POVMs on the two
/// sides; tiny negative values from rounding are clamped to zero.
pub fn joint_outcome_probs(
    rho: &DensityMatrix,
    dim_a: usize,
    dim_b: usize,
    povm_a: &[HermitianOperator],
    povm_b: &[HermitianOperator],
) -> Result<Vec<Vec<f64>>> {
    if dim_a * dim_b != rho.dim() {
        return Err(Error::DimensionMismatch(format!(
            "cannot factor dim {} as {dim_a}x{dim_b}",
            rho.dim()
        )));
    }
    let mut out = vec![vec![0.0; povm_b.len()]; povm_a.len()];
    for (i, ea) in povm_a.iter().enumerate() {
        for (j, eb) in povm_b.iter().enumerate() {
            let op = HermitianOperator::new(ea.matrix().tensor(eb.matrix()))?;
            out[i][j] = op.expectation(rho.matrix())?.max(0.0);
        }
    }
    Ok(out)
}

/// Ensemble steered on Alice's side when Bob measures the POVM `povm_b`:
/// outcome `k` happens with probability `p_k` and leaves Alice in `rho_k`.
/// Zero-probability outcomes are reported with weight 0 and a maximally
/// mixed placeholder.
pub fn steered_ensemble(
    rho: &DensityMatrix,
    dim_a: usize,
    dim_b: usize,
    povm_b: &[HermitianOperator],
) -> Result<Vec<(f64, DensityMatrix)>> {
    if dim_a * dim_b != rho.dim() {
        return Err(Error::DimensionMismatch(format!(
            "cannot factor dim {} as {dim_a}x{dim_b}",
            rho.dim()
        )));
    }
    let id_a = ComplexMatrix::identity(dim_a);
    let mut out = Vec::with_capacity(povm_b.len());
    for e in povm_b {
        let big = id_a.tensor(e.matrix());
        let weighted = big.mul(rho.matrix())?;
        let reduced = partial_trace_raw(&weighted, dim_a, dim_b, Keep::A)?;
        let p = reduced.trace().re;
        if p <= 1e-14 {
            out.push((0.0, DensityMatrix::maximally_mixed(dim_a)));
            continue;
        }
        let scaled = reduced.scale(Complex64::new(1.0 / p, 0.0));
        // tr_B[(1 (x) E) rho] matches tr_B[(1 (x) sqrt(E)) rho (1 (x) sqrt(E))]
        // only up to the anti-Hermitian part introduced by rounding, so take
        // the Hermitian part before validating.
        let herm = scaled
            .add(&scaled.adjoint())
            .expect("same dim")
            .scale(Complex64::new(0.5, 0.0));
        out.push((p, DensityMatrix::new(HermitianOperator::new(herm)?)?));
    }
    Ok(out)
}

/// Worst slack of the certification bound over `count` seeded random qubit
/// setups; negative values would falsify the bound.
pub fn min_slack_over_random_setups(count: usize, seed: u64) -> f64 {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..count)
            .into_par_iter()
            .map(|i| slack_for(seed, i as u64))
            .reduce(|| f64::INFINITY, f64::min)
    }
    #[cfg(not(feature = "parallel"))]
    {
        min_slack_over_random_setups_sequential(count, seed)
    }
}

/// Sequential twin of [`min_slack_over_random_setups`].
pub fn min_slack_over_random_setups_sequential(count: usize, seed: u64) -> f64 {
    (0..count)
        .map(|i| slack_for(seed, i as u64))
        .fold(f64::INFINITY, f64::min)
}

fn slack_for(seed: u64, index: u64) -> f64 {
    let mut rng = rng::stream(seed, index);
    let setup = random_qubit_setup(&mut rng);
    verify_beta_eps_bound(&setup).expect("valid setup").slack
}
