//! Exactly computable probabilistic machinery on small finite product
//! spaces: Hamming metrics and balls, product measures, the product-measure
//! concentration inequality `P[A](1 - P[B(A,d)]) <= exp(-d^2/4n)`, and the
//! prefix-interpolation construction between two product distributions.
//!
//! Everything here is verified by exhaustive enumeration at desk scale;
//! universes are capped at `2^20` points.

use std::collections::BTreeSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A point of the product universe, one symbol per coordinate.
pub type Point = Vec<u8>;

/// Absolute tolerance for all probability comparisons.
pub const TOLERANCE: f64 = 1e-12;

/// Largest enumerable universe.
pub const MAX_UNIVERSE: u64 = 1 << 20;

#[derive(Debug, Error, PartialEq)]
pub enum ConcentrationError {
    #[error("points have mismatched lengths {a} and {b}")]
    LengthMismatch { a: usize, b: usize },
    #[error("operation requires a non-empty point set")]
    EmptySet,
    #[error("universe has {size} points, exceeding the cap of {MAX_UNIVERSE}")]
    UniverseTooLarge { size: u64 },
    #[error("universes disagree (coordinate count or alphabet sizes differ)")]
    UniverseMismatch,
    #[error("coordinate {index} probabilities sum to {sum}, not 1")]
    CoordinateNotNormalized { index: usize, sum: f64 },
    #[error("coordinate {index} holds a negative probability")]
    NegativeProbability { index: usize },
    #[error("distribution needs at least one coordinate")]
    NoCoordinates,
    #[error("point {point:?} lies outside the universe")]
    PointOutsideUniverse { point: Point },
    #[error("distributions differ in {differing} coordinates, at most one allowed")]
    MoreThanOneCoordinateDiffers { differing: usize },
    #[error("no interpolation index exists: the far distribution places {measure} > {eta} on the target set")]
    NoInterpolationIndex { measure: f64, eta: f64 },
    #[error("exhaustive sweep supports n <= {max}, got {n}")]
    SweepTooLarge { n: usize, max: usize },
}

/// A finite product distribution: one probability vector per coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawProductDistribution")]
pub struct ProductDistribution {
    coords: Vec<Vec<f64>>,
}

#[derive(Deserialize)]
struct RawProductDistribution {
    coords: Vec<Vec<f64>>,
}

impl TryFrom<RawProductDistribution> for ProductDistribution {
    type Error = ConcentrationError;

    fn try_from(raw: RawProductDistribution) -> Result<Self, Self::Error> {
        ProductDistribution::new(raw.coords)
    }
}

impl ProductDistribution {
    pub fn new(coords: Vec<Vec<f64>>) -> Result<Self, ConcentrationError> {
        if coords.is_empty() {
            return Err(ConcentrationError::NoCoordinates);
        }
        for (index, probs) in coords.iter().enumerate() {
            if probs.iter().any(|&p| p < 0.0) {
                return Err(ConcentrationError::NegativeProbability { index });
            }
            let sum: f64 = probs.iter().sum();
            if (sum - 1.0).abs() > TOLERANCE {
                return Err(ConcentrationError::CoordinateNotNormalized { index, sum });
            }
        }
        Ok(ProductDistribution { coords })
    }

    /// Independent fair bits on `{0,1}^n`.
    pub fn uniform_bits(n: usize) -> Result<Self, ConcentrationError> {
        ProductDistribution::new(vec![vec![0.5, 0.5]; n])
    }

    /// Independent biased bits; `ones[i]` is the probability of symbol 1 in
    /// coordinate `i`.
    pub fn bernoulli(ones: &[f64]) -> Result<Self, ConcentrationError> {
        ProductDistribution::new(ones.iter().map(|&p| vec![1.0 - p, p]).collect())
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn coords(&self) -> &[Vec<f64>] {
        &self.coords
    }

    pub fn alphabet_sizes(&self) -> Vec<u8> {
        self.coords.iter().map(|c| c.len() as u8).collect()
    }

    /// Probability of a single point under the product measure.
    pub fn point_probability(&self, point: &[u8]) -> Result<f64, ConcentrationError> {
        if point.len() != self.coords.len() {
            return Err(ConcentrationError::LengthMismatch {
                a: point.len(),
                b: self.coords.len(),
            });
        }
        let mut p = 1.0;
        for (probs, &sym) in self.coords.iter().zip(point) {
            let Some(&q) = probs.get(sym as usize) else {
                return Err(ConcentrationError::PointOutsideUniverse {
                    point: point.to_vec(),
                });
            };
            p *= q;
        }
        Ok(p)
    }

    /// Coordinates where the probability vectors differ.
    fn differing_coordinates(&self, other: &Self) -> Result<Vec<usize>, ConcentrationError> {
        if self.alphabet_sizes() != other.alphabet_sizes() {
            return Err(ConcentrationError::UniverseMismatch);
        }
        Ok(self
            .coords
            .iter()
            .zip(&other.coords)
            .enumerate()
            .filter(|(_, (a, b))| a != b)
            .map(|(i, _)| i)
            .collect())
    }
}

/// An explicit point set inside a product universe given by alphabet sizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawHammingSet")]
pub struct HammingSet {
    alphabet_sizes: Vec<u8>,
    points: BTreeSet<Point>,
}

#[derive(Deserialize)]
struct RawHammingSet {
    alphabet_sizes: Vec<u8>,
    points: BTreeSet<Point>,
}

impl TryFrom<RawHammingSet> for HammingSet {
    type Error = ConcentrationError;

    fn try_from(raw: RawHammingSet) -> Result<Self, Self::Error> {
        HammingSet::new(raw.alphabet_sizes, raw.points)
    }
}

impl HammingSet {
    pub fn new(
        alphabet_sizes: Vec<u8>,
        points: impl IntoIterator<Item = Point>,
    ) -> Result<Self, ConcentrationError> {
        universe_size(&alphabet_sizes)?;
        let points: BTreeSet<Point> = points.into_iter().collect();
        for point in &points {
            let inside = point.len() == alphabet_sizes.len()
                && point.iter().zip(&alphabet_sizes).all(|(&s, &k)| s < k);
            if !inside {
                return Err(ConcentrationError::PointOutsideUniverse {
                    point: point.clone(),
                });
            }
        }
        Ok(HammingSet {
            alphabet_sizes,
            points,
        })
    }

    /// Set of bit tuples inside `{0,1}^n`.
    pub fn bits(n: usize, points: impl IntoIterator<Item = Point>) -> Result<Self, ConcentrationError> {
        HammingSet::new(vec![2; n], points)
    }

    pub fn alphabet_sizes(&self) -> &[u8] {
        &self.alphabet_sizes
    }

    pub fn points(&self) -> &BTreeSet<Point> {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn contains(&self, point: &[u8]) -> bool {
        self.points.contains(point)
    }
}

fn universe_size(alphabet_sizes: &[u8]) -> Result<u64, ConcentrationError> {
    let mut size: u64 = 1;
    for &k in alphabet_sizes {
        size = size.saturating_mul(u64::from(k.max(1)));
        if size > MAX_UNIVERSE {
            return Err(ConcentrationError::UniverseTooLarge { size });
        }
    }
    Ok(size)
}

/// Iterates every point of the universe in lexicographic order.
pub fn enumerate_universe(
    alphabet_sizes: &[u8],
) -> Result<impl Iterator<Item = Point> + '_, ConcentrationError> {
    universe_size(alphabet_sizes)?;
    let n = alphabet_sizes.len();
    let mut current: Option<Point> = Some(vec![0; n]);
    Ok(std::iter::from_fn(move || {
        let point = current.clone()?;
        // Advance like an odometer.
        let mut next = point.clone();
        let mut idx = n;
        loop {
            if idx == 0 {
                current = None;
                break;
            }
            idx -= 1;
            if next[idx] + 1 < alphabet_sizes[idx] {
                next[idx] += 1;
                current = Some(next);
                break;
            }
            next[idx] = 0;
        }
        Some(point)
    }))
}

/// Number of coordinates where `x` and `y` differ.
pub fn hamming_distance(x: &[u8], y: &[u8]) -> Result<usize, ConcentrationError> {
    if x.len() != y.len() {
        return Err(ConcentrationError::LengthMismatch {
            a: x.len(),
            b: y.len(),
        });
    }
    Ok(x.iter().zip(y).filter(|(a, b)| a != b).count())
}

/// Minimal distance from `x` to a member of `set`.
pub fn dist_point_set(x: &[u8], set: &HammingSet) -> Result<usize, ConcentrationError> {
    if set.is_empty() {
        return Err(ConcentrationError::EmptySet);
    }
    set.points
        .iter()
        .map(|p| hamming_distance(x, p))
        .try_fold(usize::MAX, |best, d| d.map(|d| best.min(d)))
}

/// Minimal pairwise distance between two non-empty sets.
pub fn dist_set_set(a: &HammingSet, b: &HammingSet) -> Result<usize, ConcentrationError> {
    if a.is_empty() || b.is_empty() {
        return Err(ConcentrationError::EmptySet);
    }
    let mut best = usize::MAX;
    for x in &a.points {
        best = best.min(dist_point_set(x, b)?);
        if best == 0 {
            break;
        }
    }
    Ok(best)
}

/// All universe points within distance `d` of `set`, by exact enumeration.
pub fn ball(set: &HammingSet, d: usize) -> Result<HammingSet, ConcentrationError> {
    let mut points = BTreeSet::new();
    if !set.is_empty() {
        for point in enumerate_universe(&set.alphabet_sizes)? {
            if dist_point_set(&point, set)? <= d {
                points.insert(point);
            }
        }
    }
    HammingSet::new(set.alphabet_sizes.clone(), points)
}

/// Exact probability of `set` under `dist`.
pub fn measure(dist: &ProductDistribution, set: &HammingSet) -> Result<f64, ConcentrationError> {
    if dist.alphabet_sizes() != set.alphabet_sizes {
        return Err(ConcentrationError::UniverseMismatch);
    }
    let mut total = 0.0;
    for point in &set.points {
        total += dist.point_probability(point)?;
    }
    Ok(total)
}

/// One checked instance of the concentration inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TalagrandReport {
    pub lhs: f64,
    pub bound: f64,
    pub holds: bool,
}

/// Evaluates `P[A] (1 - P[B(A,d)]) <= exp(-d^2 / 4n)` by enumeration.
pub fn check_talagrand(
    dist: &ProductDistribution,
    set: &HammingSet,
    d: usize,
) -> Result<TalagrandReport, ConcentrationError> {
    if dist.alphabet_sizes() != set.alphabet_sizes {
        return Err(ConcentrationError::UniverseMismatch);
    }
    let n = dist.len() as f64;
    let pa = measure(dist, set)?;
    let pball = if set.is_empty() {
        0.0
    } else {
        measure(dist, &ball(set, d)?)?
    };
    let lhs = pa * (1.0 - pball);
    let bound = (-((d * d) as f64) / (4.0 * n)).exp();
    Ok(TalagrandReport {
        lhs,
        bound,
        holds: lhs <= bound + TOLERANCE,
    })
}

/// The prefix mixture: the first `j` coordinates come from `near`, the rest
/// from `far`.
pub fn mix_prefix(
    near: &ProductDistribution,
    far: &ProductDistribution,
    j: usize,
) -> Result<ProductDistribution, ConcentrationError> {
    if near.alphabet_sizes() != far.alphabet_sizes() {
        return Err(ConcentrationError::UniverseMismatch);
    }
    let coords = near
        .coords
        .iter()
        .take(j)
        .chain(far.coords.iter().skip(j))
        .cloned()
        .collect();
    ProductDistribution::new(coords)
}

/// Result of the interpolation search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InterpolationReport {
    /// Minimal prefix length whose mixture puts at most `eta` on `a0`.
    pub j_star: usize,
    pub p0_at_jstar: f64,
    pub p1_at_jstar: f64,
}

/// Walks the prefix mixtures from `pi0` toward `pin` and stops at the first
/// one placing probability at most `eta` on `a0`; reports that mixture's
/// measures of both sets.
pub fn interpolate(
    pi0: &ProductDistribution,
    pin: &ProductDistribution,
    a0: &HammingSet,
    a1: &HammingSet,
    eta: f64,
) -> Result<InterpolationReport, ConcentrationError> {
    if pi0.alphabet_sizes() != pin.alphabet_sizes()
        || pi0.alphabet_sizes() != a0.alphabet_sizes
        || pi0.alphabet_sizes() != a1.alphabet_sizes
    {
        return Err(ConcentrationError::UniverseMismatch);
    }
    let far_measure = measure(pin, a0)?;
    if far_measure > eta {
        return Err(ConcentrationError::NoInterpolationIndex {
            measure: far_measure,
            eta,
        });
    }
    for j in 0..=pi0.len() {
        let mixed = mix_prefix(pin, pi0, j)?;
        let p0 = measure(&mixed, a0)?;
        if p0 <= eta {
            let p1 = measure(&mixed, a1)?;
            return Ok(InterpolationReport {
                j_star: j,
                p0_at_jstar: p0,
                p1_at_jstar: p1,
            });
        }
    }
    unreachable!("j = n satisfies the probe by the precondition");
}

/// Result of the single-coordinate ball-shift verification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallShiftReport {
    pub p_prev_a: f64,
    pub p_next_ball1: f64,
    pub holds: bool,
}

/// For distributions differing in at most one coordinate, verifies by
/// enumeration that the next distribution puts at least as much mass on
/// `B(A,1)` as the previous one puts on `A`.
pub fn ball_shift_bound(
    prev: &ProductDistribution,
    next: &ProductDistribution,
    set: &HammingSet,
) -> Result<BallShiftReport, ConcentrationError> {
    let differing = prev.differing_coordinates(next)?;
    if differing.len() > 1 {
        return Err(ConcentrationError::MoreThanOneCoordinateDiffers {
            differing: differing.len(),
        });
    }
    if prev.alphabet_sizes() != set.alphabet_sizes {
        return Err(ConcentrationError::UniverseMismatch);
    }
    let p_prev_a = measure(prev, set)?;
    let p_next_ball1 = if set.is_empty() {
        0.0
    } else {
        measure(next, &ball(set, 1)?)?
    };
    Ok(BallShiftReport {
        p_prev_a,
        p_next_ball1,
        holds: p_next_ball1 >= p_prev_a - TOLERANCE,
    })
}

// ---------------------------------------------------------------------------
// Exhaustive sweep over binary universes
// ---------------------------------------------------------------------------

/// Outcome of an exhaustive inequality sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepReport {
    pub instances: u64,
    pub violations: u64,
    /// Largest observed `lhs - bound`; negative when everything holds.
    pub worst_margin: f64,
}

/// Checks the concentration inequality for every subset of `{0,1}^n`, every
/// distance `d` in `0..=n`, under the uniform distribution plus
/// `random_dists` random Bernoulli products. Supports `n <= 4`.
///
/// Subsets are enumerated as bitmasks over the `2^n` universe points, which
/// keeps the full sweep (33.1M instances at `n = 4` with 100 extra
/// distributions) within seconds.
pub fn talagrand_sweep(
    n: usize,
    random_dists: usize,
    seed: u64,
) -> Result<SweepReport, ConcentrationError> {
    const MAX_N: usize = 4;
    if n == 0 || n > MAX_N {
        return Err(ConcentrationError::SweepTooLarge { n, max: MAX_N });
    }
    let points = 1usize << n;
    let subsets: u64 = 1u64 << points;

    // Distance-1 closed neighborhoods as point masks.
    let neighborhoods: Vec<u32> = (0..points)
        .map(|x| {
            let mut mask = 1u32 << x;
            for j in 0..n {
                mask |= 1u32 << (x ^ (1 << j));
            }
            mask
        })
        .collect();

    let bounds: Vec<f64> = (0..=n)
        .map(|d| (-((d * d) as f64) / (4.0 * n as f64)).exp())
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dists: Vec<Vec<f64>> = Vec::with_capacity(random_dists + 1);
    dists.push(vec![0.5; n]);
    for _ in 0..random_dists {
        dists.push((0..n).map(|_| rng.gen_range(0.02..0.98)).collect());
    }

    let measure_mask = |probs: &[f64], mut mask: u32| -> f64 {
        let mut total = 0.0;
        while mask != 0 {
            let x = mask.trailing_zeros() as usize;
            total += probs[x];
            mask &= mask - 1;
        }
        total
    };

    let mut report = SweepReport {
        instances: 0,
        violations: 0,
        worst_margin: f64::NEG_INFINITY,
    };

    for ones in &dists {
        // Probability of each universe point under this product measure.
        let probs: Vec<f64> = (0..points)
            .map(|x| {
                (0..n)
                    .map(|i| if (x >> i) & 1 == 1 { ones[i] } else { 1.0 - ones[i] })
                    .product()
            })
            .collect();

        for set_mask in 0..subsets {
            let set_mask = set_mask as u32;
            let pa = measure_mask(&probs, set_mask);
            let mut ball_mask = set_mask;
            for d in 0..=n {
                if d > 0 {
                    let mut expanded = ball_mask;
                    let mut rest = ball_mask;
                    while rest != 0 {
                        let x = rest.trailing_zeros() as usize;
                        expanded |= neighborhoods[x];
                        rest &= rest - 1;
                    }
                    ball_mask = expanded;
                }
                let pball = measure_mask(&probs, ball_mask);
                let lhs = pa * (1.0 - pball);
                let margin = lhs - bounds[d];
                report.instances += 1;
                if margin > report.worst_margin {
                    report.worst_margin = margin;
                }
                if margin > TOLERANCE {
                    report.violations += 1;
                }
            }
        }
    }
    Ok(report)
}

// ---------------------------------------------------------------------------
// Synthetic interpolation instances
// ---------------------------------------------------------------------------

/// A randomly generated instance satisfying the interpolation discipline:
/// two product distributions over `{0,1}^n`, two point sets separated by
/// more than `d`, and the probability threshold `eta = exp(-(d-1)^2/8n)`,
/// with each distribution placing at most `exp(-d^2/8n)` on the set it is
/// supposed to avoid.
#[derive(Debug, Clone)]
pub struct LemmaInstance {
    pub pi0: ProductDistribution,
    pub pin: ProductDistribution,
    pub a0: HammingSet,
    pub a1: HammingSet,
    pub d: usize,
    pub eta: f64,
}

/// Draws a valid instance from the rng; resamples until the measure
/// preconditions hold (the biased construction makes rejection rare).
pub fn random_lemma_instance(rng: &mut ChaCha8Rng) -> LemmaInstance {
    loop {
        let n = rng.gen_range(6..=10usize);
        let d = rng.gen_range(2..=4usize.min(n - 2));
        let low_max = (n - d - 1) / 2;
        let high_min = low_max + d + 1;

        let sample_points = |rng: &mut ChaCha8Rng, lo: usize, hi: usize| -> BTreeSet<Point> {
            let count = rng.gen_range(1..=3usize);
            let mut points = BTreeSet::new();
            // Bounded attempts: narrow weight ranges may not hold `count`
            // distinct points.
            for _ in 0..64 {
                if points.len() >= count {
                    break;
                }
                let weight = rng.gen_range(lo..=hi);
                let mut point = vec![0u8; n];
                let mut placed = 0;
                while placed < weight {
                    let idx = rng.gen_range(0..n);
                    if point[idx] == 0 {
                        point[idx] = 1;
                        placed += 1;
                    }
                }
                points.insert(point);
            }
            points
        };

        let a0 = HammingSet::bits(n, sample_points(rng, 0, low_max)).expect("in-universe");
        let a1 = HammingSet::bits(n, sample_points(rng, high_min, n)).expect("in-universe");

        let pi0 = ProductDistribution::bernoulli(
            &(0..n).map(|_| rng.gen_range(0.05..0.25)).collect::<Vec<_>>(),
        )
        .expect("valid probabilities");
        let pin = ProductDistribution::bernoulli(
            &(0..n).map(|_| rng.gen_range(0.75..0.95)).collect::<Vec<_>>(),
        )
        .expect("valid probabilities");

        let nf = n as f64;
        let tau = (-((d * d) as f64) / (8.0 * nf)).exp();
        let eta = (-(((d - 1) * (d - 1)) as f64) / (8.0 * nf)).exp();

        let sep = dist_set_set(&a0, &a1).expect("both sets non-empty");
        let p_pin_a0 = measure(&pin, &a0).expect("same universe");
        let p_pi0_a1 = measure(&pi0, &a1).expect("same universe");
        if sep > d && p_pin_a0 <= tau && p_pi0_a1 <= tau {
            return LemmaInstance {
                pi0,
                pin,
                a0,
                a1,
                d,
                eta,
            };
        }
    }
}

/// Outcome of the interpolation demonstrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LemmaDemoReport {
    pub instances: u64,
    pub interpolation_violations: u64,
    pub ball_shift_pairs: u64,
    pub ball_shift_violations: u64,
}

/// Runs `instances` random interpolation instances: the reported mixture
/// must place at most `eta` on both sets, and the ball-shift inequality is
/// verified by enumeration on every adjacent prefix pair.
pub fn lemma_interpolation_demo(
    instances: usize,
    seed: u64,
) -> Result<LemmaDemoReport, ConcentrationError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = LemmaDemoReport {
        instances: 0,
        interpolation_violations: 0,
        ball_shift_pairs: 0,
        ball_shift_violations: 0,
    };
    for _ in 0..instances {
        let inst = random_lemma_instance(&mut rng);
        report.instances += 1;
        let result = interpolate(&inst.pi0, &inst.pin, &inst.a0, &inst.a1, inst.eta)?;
        if result.p0_at_jstar > inst.eta + TOLERANCE || result.p1_at_jstar > inst.eta + TOLERANCE {
            report.interpolation_violations += 1;
        }
        for j in 1..=inst.pi0.len() {
            let prev = mix_prefix(&inst.pin, &inst.pi0, j - 1)?;
            let next = mix_prefix(&inst.pin, &inst.pi0, j)?;
            let shift = ball_shift_bound(&prev, &next, &inst.a0)?;
            report.ball_shift_pairs += 1;
            if !shift.holds {
                report.ball_shift_violations += 1;
            }
        }
    }
    Ok(report)
}
