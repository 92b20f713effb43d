//! Deterministic vector pre- and post-processing: randomized Hadamard
//! rotation, the mixture clipping map, modular encoding, and the rounding
//! schemes used by the baselines.

use crate::error::{invalid, Error, Result};
use crate::rng::RandomSource;
use crate::samplers::bernoulli_frac;

/// Shared random sign diagonal `ξ ∈ {-1, +1}^d` of the rotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignVector {
    xi: Vec<i8>,
}

/// Stream index reserved for sign vectors under a public seed.
const SIGN_STREAM: u64 = 0x5167_4e00;

impl SignVector {
    /// Signs drawn from a public seed; every party derives the same vector.
    pub fn from_seed(seed: u64, d: usize) -> Result<Self> {
        check_pow2(d)?;
        let mut src = RandomSource::derived(seed, &[SIGN_STREAM, d as u64]);
        let xi = (0..d).map(|_| if src.rand_int(2).expect("n = 2") == 1 { 1 } else { -1 }).collect();
        Ok(Self { xi })
    }

    /// All `+1` (rotation becomes the plain normalized Hadamard transform).
    pub fn ones(d: usize) -> Result<Self> {
        check_pow2(d)?;
        Ok(Self { xi: vec![1; d] })
    }

    pub fn from_signs(xi: Vec<i8>) -> Result<Self> {
        check_pow2(xi.len())?;
        if xi.iter().any(|&s| s != 1 && s != -1) {
            return Err(invalid("sign vector entries must be +1 or -1"));
        }
        Ok(Self { xi })
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn signs(&self) -> &[i8] {
        &self.xi
    }
}

fn check_pow2(d: usize) -> Result<()> {
    if d == 0 || !d.is_power_of_two() {
        return Err(invalid(format!("dimension {d} is not a power of two")));
    }
    Ok(())
}

/// In-place unnormalized Walsh–Hadamard transform (Sylvester ordering).
pub fn fwht(v: &mut [f64]) -> Result<()> {
    check_pow2(v.len())?;
    let mut h = 1;
    while h < v.len() {
        for block in v.chunks_mut(2 * h) {
            let (a, b) = block.split_at_mut(h);
            for (x, y) in a.iter_mut().zip(b) {
                let (s, t) = (*x + *y, *x - *y);
                *x = s;
                *y = t;
            }
        }
        h *= 2;
    }
    Ok(())
}

/// `H D_ξ v` with `H` the orthonormal `d × d` Hadamard matrix.
pub fn rotate(v: &[f64], xi: &SignVector) -> Result<Vec<f64>> {
    if v.len() != xi.len() {
        return Err(invalid(format!("vector length {} != sign vector length {}", v.len(), xi.len())));
    }
    let mut out: Vec<f64> = v.iter().zip(&xi.xi).map(|(x, &s)| x * f64::from(s)).collect();
    fwht(&mut out)?;
    let norm = 1.0 / (v.len() as f64).sqrt();
    out.iter_mut().for_each(|x| *x *= norm);
    Ok(out)
}

/// Inverse of [`rotate`]: `D_ξ Hᵀ v`.
pub fn unrotate(v: &[f64], xi: &SignVector) -> Result<Vec<f64>> {
    if v.len() != xi.len() {
        return Err(invalid(format!("vector length {} != sign vector length {}", v.len(), xi.len())));
    }
    let mut out = v.to_vec();
    fwht(&mut out)?;
    let norm = 1.0 / (v.len() as f64).sqrt();
    for (x, &s) in out.iter_mut().zip(&xi.xi) {
        *x *= norm * f64::from(s);
    }
    Ok(out)
}

/// Privacy charge of one coordinate: `a² + p - p²` with `a = |g|`,
/// `p = a - ⌊a⌋`. Strictly increasing in `|g|`.
pub fn phi(g: f64) -> f64 {
    let a = g.abs();
    let p = a - a.floor();
    a * a + p - p * p
}

/// The magnitude `a >= 0` with `φ(a) = u`: writing `k = ⌊√u⌋`, it is
/// `k + (u - k²)/(2k + 1)`.
pub fn phi_inverse(u: f64) -> f64 {
    if !(u > 0.0) {
        return 0.0;
    }
    let mut k = u.sqrt().floor();
    // guard the floor against rounding in sqrt
    while (k + 1.0) * (k + 1.0) <= u {
        k += 1.0;
    }
    while k > 0.0 && k * k > u {
        k -= 1.0;
    }
    k + (u - k * k) / (2.0 * k + 1.0)
}

fn sign(x: f64) -> f64 {
    // sign(0) = +1
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Relative headroom left under `c` when scaling is active, so rounding in
/// the inverse map cannot push the total charge over the budget.
const CLIP_MARGIN: f64 = 1e-12;

/// Rescales `g` so that `Σ_j φ(g_j) <= c`: charges are scaled down
/// uniformly, then mapped back through `φ⁻¹`. No coordinate bound applied.
pub fn phi_l1_clip(g: &[f64], c: f64) -> Vec<f64> {
    let charges: Vec<f64> = g.iter().map(|&x| phi(x)).collect();
    let total: f64 = charges.iter().sum();
    if total <= c {
        return g.to_vec();
    }
    let scale = c / total * (1.0 - CLIP_MARGIN);
    g.iter().zip(&charges).map(|(&x, &u)| sign(x) * phi_inverse(u * scale)).collect()
}

/// Clipping parameters for one participant vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipSpec {
    /// Budget on `Σ_j φ(g_j)`, in scaled units.
    pub c: f64,
    /// Per-coordinate magnitude cap.
    pub delta_inf: u64,
    /// Scale applied before rounding.
    pub gamma: f64,
    /// Modulus of the secure aggregator (power of two).
    pub m: u64,
    /// Dimension (power of two).
    pub d: usize,
}

impl ClipSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(invalid(format!("clipping budget must be positive, got {}", self.c)));
        }
        if self.delta_inf == 0 {
            return Err(invalid("coordinate bound must be at least 1"));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(invalid(format!("scale must be positive, got {}", self.gamma)));
        }
        if self.m < 4 || !self.m.is_power_of_two() {
            return Err(invalid(format!("modulus {} is not a power of two >= 4", self.m)));
        }
        if self.delta_inf > self.m / 2 - 1 {
            return Err(invalid(format!("coordinate bound {} not representable modulo {}", self.delta_inf, self.m)));
        }
        check_pow2(self.d)
    }
}

/// [`phi_l1_clip`] followed by clamping each coordinate to `[-Δ∞, Δ∞]`.
/// Because `φ` increases in `|g|`, the clamp never raises the total charge.
pub fn clip_smm(g: &[f64], spec: &ClipSpec) -> Vec<f64> {
    let cap = spec.delta_inf as f64;
    phi_l1_clip(g, spec.c).into_iter().map(|x| x.clamp(-cap, cap)).collect()
}

/// A vector over `Z_m`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedVector {
    pub entries: Vec<u64>,
    pub m: u64,
}

/// Reduces each entry modulo `m`.
pub fn mod_encode(x: &[i64], m: u64) -> EncodedVector {
    let mi = i128::from(m);
    EncodedVector { entries: x.iter().map(|&v| i128::from(v).rem_euclid(mi) as u64).collect(), m }
}

/// Maps residues to the centered range `[-m/2, m/2)`.
pub fn mod_decode(z: &EncodedVector) -> Vec<i64> {
    let half = z.m / 2;
    z.entries.iter().map(|&e| if e >= half { e as i64 - z.m as i64 } else { e as i64 }).collect()
}

/// Rounds each coordinate up with probability equal to its fractional
/// part, down otherwise. Unbiased; may increase the norm.
pub fn stochastic_round(x: &[f64], src: &mut RandomSource) -> Result<Vec<i64>> {
    x.iter()
        .map(|&v| {
            let fl = v.floor();
            let up = bernoulli_frac(v - fl, src)?;
            Ok(fl as i64 + i64::from(up))
        })
        .collect()
}

/// Norm bound accepted by [`conditional_round`] for inputs of norm at most
/// `γ Δ₂`:
/// `√(γ²Δ₂² + d/4 + √(2 ln(1/β)) (γΔ₂ + √d/2))`.
pub fn conditional_round_bound(gamma: f64, delta2: f64, d: usize, beta: f64) -> f64 {
    let gd = gamma * delta2;
    let df = d as f64;
    (gd * gd + df / 4.0 + (2.0 * (1.0 / beta).ln()).sqrt() * (gd + df.sqrt() / 2.0)).sqrt()
}

/// Stochastically rounds `x` (already scaled, `‖x‖₂ <= γΔ₂`) until the
/// result's norm is within [`conditional_round_bound`].
pub fn conditional_round(
    x: &[f64],
    gamma: f64,
    delta2: f64,
    beta: f64,
    src: &mut RandomSource,
    max_tries: usize,
) -> Result<Vec<i64>> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid(format!("beta {beta} outside (0, 1)")));
    }
    let bound = conditional_round_bound(gamma, delta2, x.len(), beta);
    let bound_sq = bound * bound;
    for _ in 0..max_tries {
        let r = stochastic_round(x, src)?;
        let norm_sq: f64 = r.iter().map(|&v| (v as f64).powi(2)).sum();
        if norm_sq <= bound_sq {
            return Ok(r);
        }
    }
    Err(Error::RoundingFailure { tries: max_tries })
}

/// Scales `x` down to L2 norm at most `radius`.
pub fn l2_clip(x: &[f64], radius: f64) -> Vec<f64> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm <= radius || norm == 0.0 {
        x.to_vec()
    } else {
        x.iter().map(|v| v * radius / norm).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hadamard_by_hand() {
        let xi = SignVector::ones(4).unwrap();
        let r = rotate(&[1.0, 0.0, 0.0, 0.0], &xi).unwrap();
        assert_eq!(r, vec![0.5; 4]);
        let one = SignVector::from_signs(vec![-1]).unwrap();
        assert_eq!(rotate(&[3.0], &one).unwrap(), vec![-3.0]);
        assert!(rotate(&[1.0, 2.0, 3.0], &xi).is_err());
        assert!(SignVector::ones(6).is_err());
    }

    #[test]
    fn shared_seed_gives_shared_signs() {
        let a = SignVector::from_seed(9, 64).unwrap();
        assert_eq!(a, SignVector::from_seed(9, 64).unwrap());
        assert_ne!(a, SignVector::from_seed(10, 64).unwrap());
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi(3.0), 9.0);
        assert_eq!(phi(-3.0), 9.0);
        assert!((phi(2.2) - 5.0).abs() < 1e-12);
        assert_eq!(phi_inverse(5.0), 2.2);
        assert_eq!(phi_inverse(0.0), 0.0);
        let mut prev = -1.0;
        for i in 0..10_000 {
            let v = phi(i as f64 * 0.001);
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn clip_leaves_small_inputs_alone() {
        let spec = ClipSpec { c: 100.0, delta_inf: 5, gamma: 1.0, m: 1 << 16, d: 4 };
        let g = [1.5, -2.25, 0.0, 3.0];
        let out = clip_smm(&g, &spec);
        for (a, b) in g.iter().zip(&out) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn clip_enforces_budget() {
        let spec = ClipSpec { c: 10.0, delta_inf: 2, gamma: 1.0, m: 1 << 16, d: 4 };
        let out = clip_smm(&[5.0, -7.5, 0.3, 0.0], &spec);
        assert!(out.iter().map(|&x| phi(x)).sum::<f64>() <= 10.0);
        assert!(out.iter().all(|x| x.abs() <= 2.0));
        assert_eq!(out[3], 0.0);
        assert!(out[1] < 0.0);
    }

    #[test]
    fn modular_round_trip() {
        assert_eq!(mod_encode(&[0, -1], 256).entries, vec![0, 255]);
        assert_eq!(mod_decode(&EncodedVector { entries: vec![255, 0], m: 256 }), vec![-1, 0]);
        let xs: Vec<i64> = (-8..8).collect();
        assert_eq!(mod_decode(&mod_encode(&xs, 16)), xs);
    }

    #[test]
    fn rounding_bound_example() {
        let b = conditional_round_bound(4.0, 1.0, 4096, (-0.5f64).exp());
        assert!((b - 1076f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn stochastic_round_is_unbiased() {
        let mut src = RandomSource::new(1);
        assert_eq!(stochastic_round(&[2.0, -3.0], &mut src).unwrap(), vec![2, -3]);
        let r = stochastic_round(&vec![0.01; 10_000], &mut src).unwrap();
        let mean = r.iter().sum::<i64>() as f64 / 1e4;
        // sd of the mean is sqrt(0.0099/1e4) ~ 0.001
        assert!((mean - 0.01).abs() < 0.004, "{mean}");
    }

    #[test]
    fn conditional_round_accepts_integers() {
        let mut src = RandomSource::new(2);
        let x = [1.0, -2.0, 0.0, 3.0];
        let r = conditional_round(&x, 4.0, 1.0, (-0.5f64).exp(), &mut src, 1).unwrap();
        assert_eq!(r, vec![1, -2, 0, 3]);
    }
}
