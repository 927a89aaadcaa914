//! Forward noising.
//!
//! Two processes live here. The classical one is the Gaussian chain with a
//! linear β schedule, sampled in closed form:
//! `x_t = sqrt(ᾱ_t)·x_0 + sqrt(1 - ᾱ_t)·ε` with `ᾱ_t = Π_{s≤t} (1 - β_s)`.
//! The quantum one scrambles each encoded channel with a single Haar-random
//! 16×16 unitary shared by all of the channel's 4-qubit groups. Fractional
//! powers `u^s` of the scrambling unitary give intermediate noise levels.

use crate::encoding::{EncodedChannel, GROUP, NUM_CHANNELS};
use crate::error::{Error, Result};
use crate::qlinalg::{dagger, herm_eig, matmul, ComplexMatrix, C64, I};
use crate::qsim::{haar_unitary, StateVector};
use crate::rng::RngStream;
use crate::tensor::Tensor3;

/// Hilbert-space dimension of one encoded group.
pub const GROUP_DIM: usize = 1 << GROUP;

const UNITARY_TOL: f64 = 1e-10;

/// Linear variance schedule with precomputed cumulative products.
#[derive(Clone, Debug, PartialEq)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    /// `β_t` for `t` in `1..=T`.
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    /// `ᾱ_t` for `t` in `1..=T`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bars[t - 1]
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }
}

pub fn make_schedule(steps: usize, beta_start: f64, beta_end: f64) -> Result<NoiseSchedule> {
    if steps == 0 {
        return Err(Error::InvalidArgument(
            "schedule needs at least one step".into(),
        ));
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}"
        )));
    }
    let betas: Vec<f64> = (0..steps)
        .map(|i| {
            if steps == 1 {
                beta_start
            } else {
                beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64
            }
        })
        .collect();
    let alpha_bars = betas
        .iter()
        .scan(1.0, |acc, b| {
            *acc *= 1.0 - b;
            Some(*acc)
        })
        .collect();
    Ok(NoiseSchedule { betas, alpha_bars })
}

/// Standard normal tensor of the given shape.
pub fn gaussian_like(shape: (usize, usize, usize), rng: &mut RngStream) -> Tensor3 {
    let (c, h, w) = shape;
    let data = (0..c * h * w).map(|_| rng.normal()).collect();
    Tensor3::new(c, h, w, data).expect("shape matches")
}

/// Closed-form sample of `x_t` given `x_0` and the noise draw.
pub fn classical_forward(
    x0: &Tensor3,
    t: usize,
    noise: &Tensor3,
    sched: &NoiseSchedule,
) -> Result<Tensor3> {
    if t == 0 || t > sched.steps() {
        return Err(Error::InvalidArgument(format!(
            "timestep {t} outside 1..={}",
            sched.steps()
        )));
    }
    if !x0.same_shape(noise) {
        return Err(Error::Dimension("noise shape differs from x0".into()));
    }
    let ab = sched.alpha_bar(t);
    let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
    let (c, h, w) = x0.shape();
    let data = x0
        .as_slice()
        .iter()
        .zip(noise.as_slice())
        .map(|(x, e)| a * x + b * e)
        .collect();
    Tensor3::new(c, h, w, data)
}

/// One Haar unitary per channel.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelScrambler {
    seed: u64,
    unitaries: Vec<ComplexMatrix>,
}

impl ChannelScrambler {
    /// Draws four independent 16×16 Haar unitaries from a stream keyed by `seed`.
    pub fn new(seed: u64) -> Self {
        let mut rng = RngStream::new(seed);
        let unitaries = (0..NUM_CHANNELS)
            .map(|_| haar_unitary(GROUP_DIM, &mut rng).expect("Ginibre matrices are full rank"))
            .collect();
        Self { seed, unitaries }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn unitary(&self, channel: usize) -> &ComplexMatrix {
        &self.unitaries[channel]
    }

    pub fn unitaries(&self) -> &[ComplexMatrix] {
        &self.unitaries
    }
}

fn check_group_unitary(u: &ComplexMatrix) -> Result<()> {
    if u.rows() != GROUP_DIM || u.cols() != GROUP_DIM {
        return Err(Error::Dimension(format!(
            "scrambler must be {GROUP_DIM}x{GROUP_DIM}, got {}x{}",
            u.rows(),
            u.cols()
        )));
    }
    let dev = u.unitary_deviation();
    if dev > UNITARY_TOL {
        return Err(Error::NotUnitary(dev));
    }
    Ok(())
}

fn apply_to_groups(ec: &EncodedChannel, u: &ComplexMatrix) -> EncodedChannel {
    let groups = ec
        .groups
        .iter()
        .map(|g| {
            StateVector::from_amplitudes_unchecked(
                u.matvec(g.amplitudes()).expect("16-dim group state"),
            )
        })
        .collect();
    EncodedChannel { groups }
}

/// Applies `u` to every group of the channel.
pub fn scramble_channel(ec: &EncodedChannel, u: &ComplexMatrix) -> Result<EncodedChannel> {
    check_group_unitary(u)?;
    if ec.groups.iter().any(|g| g.num_qubits() != GROUP) {
        return Err(Error::Dimension(format!(
            "channel groups must be {GROUP}-qubit states"
        )));
    }
    Ok(apply_to_groups(ec, u))
}

/// Spectral form `u = V·diag(e^{iφ})·V†` with principal eigenphases in (−π, π].
#[derive(Clone, Debug)]
pub struct UnitarySpectrum {
    vectors: ComplexMatrix,
    phases: Vec<f64>,
}

impl UnitarySpectrum {
    /// Diagonalizes a unitary through Hermitian combinations of `u` and `u†`.
    ///
    /// `H(ϕ) = cos ϕ·(u + u†)/2 + sin ϕ·(u − u†)/2i` shares the eigenvectors of
    /// `u` with eigenvalues `cos(φ_k − ϕ)`. Eigenvalues of `H(ϕ)` that collide
    /// (phases mirrored about ϕ) are split by the companion `sin(φ_k − ϕ)`
    /// operator. Several offsets are tried; the most accurate wins.
    pub fn new(u: &ComplexMatrix) -> Result<Self> {
        if !u.is_square() {
            return Err(Error::Dimension("unitary must be square".into()));
        }
        let dev = u.unitary_deviation();
        if dev > UNITARY_TOL {
            return Err(Error::NotUnitary(dev));
        }
        let ud = dagger(u);
        let sum = u.add(&ud)?.scale(C64::new(0.5, 0.0));
        let diff = u.sub(&ud)?.scale(-I * 0.5);

        let mut best: Option<(f64, Self)> = None;
        for offset in [0.0, 1.0, 2.2, 0.45, 2.9] {
            let spectrum = Self::with_offset(u, &sum, &diff, offset)?;
            let err = spectrum.power(1.0).max_abs_diff(u);
            if err < 1e-12 {
                return Ok(spectrum);
            }
            if best.as_ref().is_none_or(|(e, _)| err < *e) {
                best = Some((err, spectrum));
            }
        }
        Ok(best.expect("at least one offset").1)
    }

    fn with_offset(
        u: &ComplexMatrix,
        sum: &ComplexMatrix,
        diff: &ComplexMatrix,
        offset: f64,
    ) -> Result<Self> {
        let (s, c) = offset.sin_cos();
        let primary = sum
            .scale(C64::new(c, 0.0))
            .add(&diff.scale(C64::new(s, 0.0)))?;
        let companion = diff
            .scale(C64::new(c, 0.0))
            .sub(&sum.scale(C64::new(s, 0.0)))?;
        let (vals, mut vecs) = herm_eig(&primary)?;
        let n = vals.len();

        let mut start = 0;
        while start < n {
            let mut end = start + 1;
            while end < n && vals[end] - vals[end - 1] < 1e-7 {
                end += 1;
            }
            if end - start > 1 {
                split_cluster(&mut vecs, &companion, start, end)?;
            }
            start = end;
        }

        let phases = (0..n)
            .map(|k| {
                let v = vecs.column(k);
                let uv = u.matvec(&v).expect("square");
                let rq: C64 = v.iter().zip(&uv).map(|(a, b)| a.conj() * b).sum();
                let phi = rq.arg();
                // Principal branch (−π, π].
                if phi <= -std::f64::consts::PI {
                    phi + 2.0 * std::f64::consts::PI
                } else {
                    phi
                }
            })
            .collect();
        Ok(Self {
            vectors: vecs,
            phases,
        })
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    /// `u^s = V·diag(e^{i·s·φ})·V†`.
    pub fn power(&self, s: f64) -> ComplexMatrix {
        let n = self.phases.len();
        let diag: Vec<C64> = self
            .phases
            .iter()
            .map(|&p| C64::from_polar(1.0, s * p))
            .collect();
        let v = &self.vectors;
        ComplexMatrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| v[(i, k)] * diag[k] * v[(j, k)].conj()).sum()
        })
    }
}

/// Rediagonalizes columns `start..end` of `vecs` with respect to `op`.
fn split_cluster(
    vecs: &mut ComplexMatrix,
    op: &ComplexMatrix,
    start: usize,
    end: usize,
) -> Result<()> {
    let n = vecs.rows();
    let k = end - start;
    let basis = ComplexMatrix::from_fn(n, k, |r, c| vecs[(r, start + c)]);
    let reduced = matmul(&dagger(&basis), &matmul(op, &basis)?)?;
    let (_, w) = herm_eig(&reduced)?;
    let rotated = matmul(&basis, &w)?;
    for r in 0..n {
        for c in 0..k {
            vecs[(r, start + c)] = rotated[(r, c)];
        }
    }
    Ok(())
}

/// Applies `u^s` to every group of the channel, `s ∈ [0, 1]`.
pub fn fractional_scramble(
    ec: &EncodedChannel,
    u: &ComplexMatrix,
    s: f64,
) -> Result<EncodedChannel> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::InvalidArgument(format!(
            "fraction {s} outside [0, 1]"
        )));
    }
    check_group_unitary(u)?;
    let spectrum = UnitarySpectrum::new(u)?;
    Ok(apply_to_groups(ec, &spectrum.power(s)))
}

/// Channel of `groups` independent Haar-random 4-qubit states.
pub fn noise_prior_channel(groups: usize, rng: &mut RngStream) -> EncodedChannel {
    let groups = (0..groups)
        .map(|_| {
            let u = haar_unitary(GROUP_DIM, rng).expect("Ginibre matrices are full rank");
            // First column of u is u|0000>.
            StateVector::from_amplitudes_unchecked(u.column(0))
        })
        .collect();
    EncodedChannel { groups }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::{decode_channel, encode_channel};
    use crate::qsim::expectation_z;

    fn random_channel(rng: &mut RngStream, groups: usize) -> EncodedChannel {
        let px: Vec<f64> = (0..groups * GROUP).map(|_| rng.uniform()).collect();
        encode_channel(&px).unwrap()
    }

    fn channel_diff(a: &EncodedChannel, b: &EncodedChannel) -> f64 {
        a.groups
            .iter()
            .zip(&b.groups)
            .map(|(x, y)| x.max_abs_diff(y))
            .fold(0.0, f64::max)
    }

    #[test]
    fn schedule_cases() {
        let s = make_schedule(1, 0.1, 0.1).unwrap();
        assert!((s.alpha_bar(1) - 0.9).abs() < 1e-15);

        let s = make_schedule(50, 0.03, 0.03).unwrap();
        for t in 1..=50 {
            assert!((s.alpha_bar(t) - 0.97f64.powi(t as i32)).abs() < 1e-12);
        }

        let s = make_schedule(1000, 1e-4, 0.02).unwrap();
        assert!(s.alpha_bar(1000) < 0.01);
        assert!(s.alpha_bars().windows(2).all(|w| w[1] < w[0]));
        assert!((s.beta(1) - 1e-4).abs() < 1e-18 && (s.beta(1000) - 0.02).abs() < 1e-15);

        assert!(make_schedule(0, 0.1, 0.2).is_err());
        assert!(make_schedule(10, 0.0, 0.2).is_err());
        assert!(make_schedule(10, 0.3, 0.2).is_err());
        assert!(make_schedule(10, 0.1, 1.0).is_err());
    }

    #[test]
    fn classical_forward_cases() {
        let mut rng = RngStream::new(1);
        let x0 = gaussian_like((4, 2, 2), &mut rng);
        let noise = gaussian_like((4, 2, 2), &mut rng);
        let zero = Tensor3::zeros(4, 2, 2);

        // ᾱ → 1 with zero noise leaves x0 intact.
        let tiny = make_schedule(1, 1e-300, 1e-300).unwrap();
        assert_eq!(classical_forward(&x0, 1, &zero, &tiny).unwrap(), x0);

        let sched = make_schedule(100, 1e-4, 0.02).unwrap();
        let t = 50;
        let out = classical_forward(&zero, t, &noise, &sched).unwrap();
        let k = (1.0 - sched.alpha_bar(t)).sqrt();
        assert!(out.max_abs_diff(&noise.map(|e| k * e)) < 1e-15);

        // Direct two-line oracle.
        let ab: f64 = (1..=t).map(|s| 1.0 - sched.beta(s)).product();
        let out = classical_forward(&x0, t, &noise, &sched).unwrap();
        for ((o, x), e) in out
            .as_slice()
            .iter()
            .zip(x0.as_slice())
            .zip(noise.as_slice())
        {
            assert!((o - (ab.sqrt() * x + (1.0 - ab).sqrt() * e)).abs() < 1e-12);
        }

        assert!(classical_forward(&x0, 0, &noise, &sched).is_err());
        assert!(classical_forward(&x0, 101, &noise, &sched).is_err());
        assert!(classical_forward(&x0, 1, &Tensor3::zeros(1, 2, 2), &sched).is_err());
    }

    #[test]
    fn classical_forward_is_linear() {
        let mut rng = RngStream::new(2);
        let sched = make_schedule(20, 1e-3, 0.05).unwrap();
        let shape = (4, 3, 3);
        let (xa, xb, na, nb) = (
            gaussian_like(shape, &mut rng),
            gaussian_like(shape, &mut rng),
            gaussian_like(shape, &mut rng),
            gaussian_like(shape, &mut rng),
        );
        let add = |a: &Tensor3, b: &Tensor3| {
            Tensor3::new(
                4,
                3,
                3,
                a.as_slice()
                    .iter()
                    .zip(b.as_slice())
                    .map(|(x, y)| x + y)
                    .collect(),
            )
            .unwrap()
        };
        let lhs = classical_forward(&add(&xa, &xb), 7, &add(&na, &nb), &sched).unwrap();
        let rhs = add(
            &classical_forward(&xa, 7, &na, &sched).unwrap(),
            &classical_forward(&xb, 7, &nb, &sched).unwrap(),
        );
        assert!(lhs.max_abs_diff(&rhs) < 1e-12);
    }

    #[test]
    fn scramble_identity_and_inverse() {
        let mut rng = RngStream::new(3);
        let ec = random_channel(&mut rng, 16);
        let id = ComplexMatrix::identity(16);
        assert_eq!(scramble_channel(&ec, &id).unwrap(), ec);

        let u = haar_unitary(16, &mut rng).unwrap();
        let s = scramble_channel(&ec, &u).unwrap();
        assert!(s.groups.iter().all(|g| (g.norm_sqr() - 1.0).abs() < 1e-10));
        for (g, orig) in s.groups.iter().zip(&ec.groups) {
            let want = u.matvec(orig.amplitudes()).unwrap();
            let err = g
                .amplitudes()
                .iter()
                .zip(&want)
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            assert!(err < 1e-12);
        }
        let back = scramble_channel(&s, &dagger(&u)).unwrap();
        assert!(channel_diff(&back, &ec) < 1e-10);

        let bad = ComplexMatrix::from_real_diag(&[2.0; 16]);
        assert!(matches!(
            scramble_channel(&ec, &bad),
            Err(Error::NotUnitary(_))
        ));
    }

    #[test]
    fn scrambler_is_seeded() {
        let a = ChannelScrambler::new(5);
        let b = ChannelScrambler::new(5);
        assert_eq!(a, b);
        assert_ne!(a.unitary(0), a.unitary(1));
        assert!(a.unitaries().iter().all(|u| u.unitary_deviation() < 1e-12));
        assert_ne!(ChannelScrambler::new(6).unitary(0), a.unitary(0));
    }

    #[test]
    fn fractional_endpoints_and_semigroup() {
        let mut rng = RngStream::new(4);
        let ec = random_channel(&mut rng, 16);
        for _ in 0..5 {
            let u = haar_unitary(16, &mut rng).unwrap();
            assert!(channel_diff(&fractional_scramble(&ec, &u, 0.0).unwrap(), &ec) < 1e-10);
            let full = scramble_channel(&ec, &u).unwrap();
            assert!(channel_diff(&fractional_scramble(&ec, &u, 1.0).unwrap(), &full) < 1e-9);
            let half = fractional_scramble(&ec, &u, 0.5).unwrap();
            let twice = fractional_scramble(&half, &u, 0.5).unwrap();
            assert!(channel_diff(&twice, &full) < 1e-9);
            let a =
                fractional_scramble(&fractional_scramble(&ec, &u, 0.3).unwrap(), &u, 0.45).unwrap();
            let b = fractional_scramble(&ec, &u, 0.75).unwrap();
            assert!(channel_diff(&a, &b) < 1e-8);
        }
        assert!(fractional_scramble(&ec, &ComplexMatrix::identity(16), 1.5).is_err());
    }

    #[test]
    fn spectrum_handles_degenerate_unitaries() {
        let id = ComplexMatrix::identity(16);
        let sp = UnitarySpectrum::new(&id).unwrap();
        assert!(sp.power(0.37).max_abs_diff(&id) < 1e-12);

        // Phases mirrored about zero collide in the cosine operator.
        let phases = [0.4, -0.4, 2.0, -2.0];
        let d = ComplexMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                C64::from_polar(1.0, phases[i])
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let mut rng = RngStream::new(8);
        let w = haar_unitary(4, &mut rng).unwrap();
        let u = matmul(&matmul(&w, &d).unwrap(), &dagger(&w)).unwrap();
        let sp = UnitarySpectrum::new(&u).unwrap();
        assert!(sp.power(1.0).max_abs_diff(&u) < 1e-10);
        let mut got = sp.phases().to_vec();
        got.sort_by(f64::total_cmp);
        for (g, w) in got.iter().zip([-2.0, -0.4, 0.4, 2.0]) {
            assert!((g - w).abs() < 1e-10);
        }
        // Principal branch: -1 has phase +π.
        let minus = ComplexMatrix::from_real_diag(&[-1.0, 1.0]);
        let sp = UnitarySpectrum::new(&minus).unwrap();
        assert!(sp
            .phases()
            .iter()
            .any(|&p| (p - std::f64::consts::PI).abs() < 1e-12));
    }

    #[test]
    fn noise_prior_statistics() {
        let mut rng = RngStream::new(9);
        let ec = noise_prior_channel(16, &mut rng);
        assert_eq!(ec.len(), 16);
        assert!(ec.groups.iter().all(|g| (g.norm_sqr() - 1.0).abs() < 1e-12));

        let n = 10_000;
        let mut mean = [0.0; 4];
        for g in noise_prior_channel(n, &mut rng).groups {
            for (q, m) in mean.iter_mut().enumerate() {
                *m += expectation_z(&g, q).unwrap() / n as f64;
            }
        }
        assert!(mean.iter().all(|m| m.abs() < 0.02), "{mean:?}");

        let a = noise_prior_channel(1, &mut RngStream::new(1));
        let b = noise_prior_channel(1, &mut RngStream::new(2));
        assert!(a.groups[0].fidelity(&b.groups[0]) < 1.0 - 1e-6);
    }

    #[test]
    fn scrambling_decorrelates_pixels() {
        let mut rng = RngStream::new(10);
        let px: Vec<f64> = (0..64).map(|_| rng.uniform()).collect();
        let ec = encode_channel(&px).unwrap();
        let (mut sx, mut sy, mut sxx, mut syy, mut sxy, mut n) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for _ in 0..1000 {
            let u = haar_unitary(16, &mut rng).unwrap();
            let out = decode_channel(&scramble_channel(&ec, &u).unwrap()).unwrap();
            for (&x, &y) in px.iter().zip(&out) {
                sx += x;
                sy += y;
                sxx += x * x;
                syy += y * y;
                sxy += x * y;
                n += 1.0;
            }
        }
        let cov = sxy / n - sx / n * sy / n;
        let r = cov / ((sxx / n - (sx / n).powi(2)) * (syy / n - (sy / n).powi(2))).sqrt();
        assert!(r.abs() < 0.05, "{r}");
    }
}
