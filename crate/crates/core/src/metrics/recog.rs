//! Gallery/probe matching: distance matrices, CMC and ROC/EER.

use std::fmt::Write as _;

use crate::data::Gei;
use crate::error::{Error, Result};
use crate::parallel::map_indexed;

/// Euclidean distances, `probes x gallery`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMatrix {
    pub probe_labels: Vec<String>,
    pub gallery_labels: Vec<String>,
    distances: Vec<f64>,
}

impl ScoreMatrix {
    pub fn from_vectors(
        probes: &[&[f64]],
        probe_labels: Vec<String>,
        gallery: &[&[f64]],
        gallery_labels: Vec<String>,
    ) -> Result<Self> {
        if probes.is_empty() || gallery.is_empty() {
            return Err(Error::Protocol("probe and gallery sets must be nonempty".into()));
        }
        if probes.len() != probe_labels.len() || gallery.len() != gallery_labels.len() {
            return Err(Error::shape("one label per probe and gallery item"));
        }
        let dim = gallery[0].len();
        if probes.iter().chain(gallery).any(|v| v.len() != dim) {
            return Err(Error::shape("all feature vectors must have the same length"));
        }
        let rows = map_indexed(probes.len(), |i| {
            gallery
                .iter()
                .map(|g| probes[i].iter().zip(*g).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt())
                .collect::<Vec<f64>>()
        });
        Ok(ScoreMatrix {
            probe_labels,
            gallery_labels,
            distances: rows.concat(),
        })
    }

    /// Distances between flattened GEIs, labelled by subject.
    pub fn from_geis(probes: &[Gei], gallery: &[Gei]) -> Result<Self> {
        let p: Vec<&[f64]> = probes.iter().map(Gei::pixels).collect();
        let g: Vec<&[f64]> = gallery.iter().map(Gei::pixels).collect();
        Self::from_vectors(
            &p,
            probes.iter().map(|x| x.subject.clone()).collect(),
            &g,
            gallery.iter().map(|x| x.subject.clone()).collect(),
        )
    }

    pub fn probes(&self) -> usize {
        self.probe_labels.len()
    }

    pub fn gallery(&self) -> usize {
        self.gallery_labels.len()
    }

    pub fn get(&self, probe: usize, gallery: usize) -> f64 {
        self.distances[probe * self.gallery() + gallery]
    }

    pub fn row(&self, probe: usize) -> &[f64] {
        let g = self.gallery();
        &self.distances[probe * g..(probe + 1) * g]
    }
}

pub fn score_matrix(probes: &[Gei], gallery: &[Gei]) -> Result<ScoreMatrix> {
    ScoreMatrix::from_geis(probes, gallery)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CmcCurve {
    /// Identification rate at ranks `1..=G`.
    pub rates: Vec<f64>,
    /// 1-based rank of the first correct match, per probe.
    pub probe_ranks: Vec<usize>,
}

/// Gallery sorted per probe by (distance, gallery index).
pub fn cmc(scores: &ScoreMatrix) -> Result<CmcCurve> {
    let g = scores.gallery();
    let mut probe_ranks = Vec::with_capacity(scores.probes());
    for p in 0..scores.probes() {
        let label = &scores.probe_labels[p];
        let row = scores.row(p);
        let mut order: Vec<usize> = (0..g).collect();
        order.sort_by(|&a, &b| row[a].total_cmp(&row[b]).then(a.cmp(&b)));
        let rank = order
            .iter()
            .position(|&j| &scores.gallery_labels[j] == label)
            .ok_or_else(|| Error::Protocol(format!("probe subject {label} has no gallery entry")))?;
        probe_ranks.push(rank + 1);
    }
    let n = probe_ranks.len() as f64;
    let mut counts = vec![0usize; g + 1];
    for &r in &probe_ranks {
        counts[r] += 1;
    }
    let mut rates = Vec::with_capacity(g);
    let mut acc = 0;
    for count in &counts[1..] {
        acc += count;
        rates.push(acc as f64 / n);
    }
    Ok(CmcCurve { rates, probe_ranks })
}

/// Identification rate at rank `k` (ranks past the gallery size saturate).
pub fn rank_k(curve: &CmcCurve, k: usize) -> f64 {
    if k == 0 || curve.rates.is_empty() {
        return 0.0;
    }
    curve.rates[k.min(curve.rates.len()) - 1]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RocPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RocCurve {
    /// Ascending thresholds: `-inf`, every distinct score, `+inf`.
    pub points: Vec<RocPoint>,
    pub genuine: usize,
    pub impostor: usize,
}

/// A pair is accepted when its distance is `<=` the threshold.
pub fn roc(scores: &ScoreMatrix) -> Result<RocCurve> {
    let mut genuine = Vec::new();
    let mut impostor = Vec::new();
    for p in 0..scores.probes() {
        for (j, &d) in scores.row(p).iter().enumerate() {
            if scores.gallery_labels[j] == scores.probe_labels[p] {
                genuine.push(d);
            } else {
                impostor.push(d);
            }
        }
    }
    roc_from_scores(&genuine, &impostor)
}

pub fn roc_from_scores(genuine: &[f64], impostor: &[f64]) -> Result<RocCurve> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::Protocol(format!(
            "ROC needs genuine and impostor pairs, got {} and {}",
            genuine.len(),
            impostor.len()
        )));
    }
    if genuine.iter().chain(impostor).any(|d| d.is_nan()) {
        return Err(Error::param("NaN score"));
    }
    let mut g = genuine.to_vec();
    let mut im = impostor.to_vec();
    g.sort_by(f64::total_cmp);
    im.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = g.iter().chain(&im).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let (ng, ni) = (g.len() as f64, im.len() as f64);
    let mut points = vec![RocPoint {
        threshold: f64::NEG_INFINITY,
        far: 0.0,
        frr: 1.0,
    }];
    let (mut gi, mut ii) = (0, 0);
    for &t in &thresholds {
        while gi < g.len() && g[gi] <= t {
            gi += 1;
        }
        while ii < im.len() && im[ii] <= t {
            ii += 1;
        }
        points.push(RocPoint {
            threshold: t,
            far: ii as f64 / ni,
            frr: (g.len() - gi) as f64 / ng,
        });
    }
    points.push(RocPoint {
        threshold: f64::INFINITY,
        far: 1.0,
        frr: 0.0,
    });
    Ok(RocCurve {
        points,
        genuine: g.len(),
        impostor: im.len(),
    })
}

/// Where FAR - FRR changes sign, linearly interpolated between the two
/// bracketing points.
pub fn eer(curve: &RocCurve) -> f64 {
    eer_of(curve.points.iter().map(|p| (p.far, p.frr)))
}

fn eer_of(points: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let mut prev: Option<(f64, f64)> = None;
    for (far, frr) in points {
        let d = far - frr;
        if d >= 0.0 {
            return match prev {
                Some((pfar, pfrr)) if d > 0.0 => {
                    let pd = pfar - pfrr;
                    let lambda = -pd / (d - pd);
                    pfar + lambda * (far - pfar)
                }
                _ => far,
            };
        }
        prev = Some((far, frr));
    }
    // FAR - FRR ends at +1, so this is only reached on an empty curve
    f64::NAN
}

pub fn cmc_csv(curve: &CmcCurve) -> String {
    let mut s = String::from("rank,rate\n");
    for (k, r) in curve.rates.iter().enumerate() {
        writeln!(s, "{},{}", k + 1, r).unwrap();
    }
    s
}

pub fn roc_csv(curve: &RocCurve) -> String {
    let mut s = String::from("threshold,far,frr\n");
    for p in &curve.points {
        writeln!(s, "{},{},{}", p.threshold, p.far, p.frr).unwrap();
    }
    s
}

fn csv_rows(text: &str, header: &str, width: usize) -> Result<Vec<Vec<f64>>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(header) {
        return Err(Error::Config(format!("expected header `{header}`")));
    }
    lines
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let vals: Vec<f64> = l
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 2)))?;
            if vals.len() != width {
                return Err(Error::Config(format!("line {}: expected {width} fields", i + 2)));
            }
            Ok(vals)
        })
        .collect()
}

/// Parses [`cmc_csv`] output back into rates.
pub fn parse_cmc_csv(text: &str) -> Result<Vec<f64>> {
    Ok(csv_rows(text, "rank,rate", 2)?.into_iter().map(|r| r[1]).collect())
}

/// Parses [`roc_csv`] output back into points.
pub fn parse_roc_csv(text: &str) -> Result<Vec<RocPoint>> {
    Ok(csv_rows(text, "threshold,far,frr", 3)?
        .into_iter()
        .map(|r| RocPoint {
            threshold: r[0],
            far: r[1],
            frr: r[2],
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    fn labels(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn matrix(probes: &[Vec<f64>], pl: &[&str], gallery: &[Vec<f64>], gl: &[&str]) -> ScoreMatrix {
        let p: Vec<&[f64]> = probes.iter().map(Vec::as_slice).collect();
        let g: Vec<&[f64]> = gallery.iter().map(Vec::as_slice).collect();
        ScoreMatrix::from_vectors(&p, labels(pl), &g, labels(gl)).unwrap()
    }

    fn random_set(n: usize, dim: usize, rng: &mut RngStream) -> Vec<Vec<f64>> {
        (0..n).map(|_| (0..dim).map(|_| rng.uniform()).collect()).collect()
    }

    #[test]
    fn distance_cases() {
        let a = vec![0.2; 16];
        let mut b = a.clone();
        b[5] += 0.3;
        let m = matrix(&[a.clone()], &["x"], &[a.clone(), b], &["x", "y"]);
        assert_eq!(m.get(0, 0), 0.0);
        assert!((m.get(0, 1) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn distances_match_double_loop() {
        let mut rng = RngStream::new(8);
        let p = random_set(7, 40, &mut rng);
        let g = random_set(5, 40, &mut rng);
        let m = matrix(&p, &["a"; 7], &g, &["a"; 5]);
        for i in 0..7 {
            for j in 0..5 {
                let mut s = 0.0;
                for k in 0..40 {
                    s += (p[i][k] - g[j][k]).powi(2);
                }
                assert!((m.get(i, j) - s.sqrt()).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn empty_sets_are_protocol_errors() {
        let err = ScoreMatrix::from_vectors(&[], vec![], &[&[1.0][..]], labels(&["a"])).unwrap_err();
        assert!(matches!(err, Error::Protocol(_)));
    }

    #[test]
    fn self_matching_is_perfect() {
        let mut rng = RngStream::new(1);
        let set = random_set(6, 10, &mut rng);
        let names = ["a", "b", "c", "d", "e", "f"];
        let curve = cmc(&matrix(&set, &names, &set, &names)).unwrap();
        assert_eq!(rank_k(&curve, 1), 1.0);
    }

    #[test]
    fn nearer_impostor_pushes_rank() {
        let m = matrix(&[vec![0.0]], &["a"], &[vec![2.0], vec![1.0]], &["a", "b"]);
        let curve = cmc(&m).unwrap();
        assert_eq!(rank_k(&curve, 1), 0.0);
        assert_eq!(rank_k(&curve, 2), 1.0);
        assert_eq!(curve.probe_ranks, vec![2]);
    }

    #[test]
    fn ties_go_to_lower_gallery_index() {
        let m = matrix(&[vec![0.0]], &["a"], &[vec![1.0], vec![-1.0]], &["b", "a"]);
        assert_eq!(cmc(&m).unwrap().probe_ranks, vec![2]);
        let m = matrix(&[vec![0.0]], &["a"], &[vec![1.0], vec![-1.0]], &["a", "b"]);
        assert_eq!(cmc(&m).unwrap().probe_ranks, vec![1]);
    }

    #[test]
    fn absent_probe_subject_is_protocol_error() {
        let m = matrix(&[vec![0.0]], &["z"], &[vec![1.0]], &["a"]);
        assert!(matches!(cmc(&m), Err(Error::Protocol(_))));
    }

    #[test]
    fn cmc_matches_exhaustive_sort() {
        let mut rng = RngStream::new(21);
        let g = 8;
        let gallery = random_set(g, 3, &mut rng);
        let probes = random_set(20, 3, &mut rng);
        let gl: Vec<String> = (0..g).map(|i| format!("s{}", i % 5)).collect();
        let pl: Vec<String> = (0..20).map(|_| format!("s{}", rng.below(5))).collect();
        let pr: Vec<&[f64]> = probes.iter().map(Vec::as_slice).collect();
        let ga: Vec<&[f64]> = gallery.iter().map(Vec::as_slice).collect();
        let m = ScoreMatrix::from_vectors(&pr, pl.clone(), &ga, gl.clone()).unwrap();
        let curve = cmc(&m).unwrap();
        for (p, probe) in probes.iter().enumerate() {
            // count gallery entries strictly ahead of the best genuine one
            let key = |j: usize| -> (f64, usize) {
                let d: f64 = probe.iter().zip(&gallery[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                (d, j)
            };
            let best = (0..g).filter(|&j| gl[j] == pl[p]).map(key).min_by(|a, b| a.partial_cmp(b).unwrap()).unwrap();
            let ahead = (0..g).map(key).filter(|k| k < &best).count();
            assert_eq!(curve.probe_ranks[p], ahead + 1);
        }
        for k in 1..=g {
            let expected = curve.probe_ranks.iter().filter(|&&r| r <= k).count() as f64 / 20.0;
            assert_eq!(rank_k(&curve, k), expected);
        }
        assert_eq!(rank_k(&curve, g), 1.0);
    }

    #[test]
    fn separated_scores_give_zero_eer() {
        let curve = roc_from_scores(&[0.1, 0.2, 0.3], &[0.5, 0.9]).unwrap();
        assert_eq!(eer(&curve), 0.0);
    }

    #[test]
    fn identical_distributions_give_half() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert!((eer(&roc_from_scores(&s, &s).unwrap()) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn roc_needs_both_classes() {
        assert!(matches!(roc_from_scores(&[1.0], &[]), Err(Error::Protocol(_))));
        let m = matrix(&[vec![0.0]], &["a"], &[vec![1.0]], &["a"]);
        assert!(roc(&m).is_err());
    }

    // brute-force FAR/FRR on a uniform threshold grid
    fn dense_eer(genuine: &[f64], impostor: &[f64], steps: usize) -> f64 {
        let lo = genuine.iter().chain(impostor).cloned().fold(f64::INFINITY, f64::min) - 1e-3;
        let hi = genuine.iter().chain(impostor).cloned().fold(f64::NEG_INFINITY, f64::max) + 1e-3;
        let mut prev: Option<(f64, f64)> = None;
        for k in 0..=steps {
            let t = lo + (hi - lo) * k as f64 / steps as f64;
            let far = impostor.iter().filter(|&&d| d <= t).count() as f64 / impostor.len() as f64;
            let frr = genuine.iter().filter(|&&d| d > t).count() as f64 / genuine.len() as f64;
            if far - frr >= 0.0 {
                let (pf, pr) = prev.unwrap();
                let (pd, d) = (pf - pr, far - frr);
                return if d == 0.0 { far } else { pf + (-pd / (d - pd)) * (far - pf) };
            }
            prev = Some((far, frr));
        }
        unreachable!()
    }

    #[test]
    fn eer_matches_dense_sweep() {
        for seed in 0..5 {
            let mut rng = RngStream::new(100 + seed);
            let genuine: Vec<f64> = (0..30).map(|_| rng.normal(1.0, 0.5)).collect();
            let impostor: Vec<f64> = (0..70).map(|_| rng.normal(1.8, 0.5)).collect();
            let fast = eer(&roc_from_scores(&genuine, &impostor).unwrap());
            let slow = dense_eer(&genuine, &impostor, 100_000);
            assert!((fast - slow).abs() <= 1e-3, "seed {seed}: {fast} vs {slow}");
        }
    }

    #[test]
    fn csv_round_trip() {
        let mut rng = RngStream::new(3);
        let genuine: Vec<f64> = (0..5).map(|_| rng.uniform()).collect();
        let impostor: Vec<f64> = (0..9).map(|_| rng.uniform() + 0.3).collect();
        let r = roc_from_scores(&genuine, &impostor).unwrap();
        assert_eq!(parse_roc_csv(&roc_csv(&r)).unwrap(), r.points);
        let c = CmcCurve {
            rates: vec![0.1, 1.0 / 3.0, 1.0],
            probe_ranks: vec![],
        };
        assert_eq!(parse_cmc_csv(&cmc_csv(&c)).unwrap(), c.rates);
    }

    proptest! {
        #[test]
        fn roc_monotone_and_cmc_nondecreasing(seed in any::<u64>()) {
            let mut rng = RngStream::new(seed);
            let gallery = random_set(6, 4, &mut rng);
            let probes = random_set(9, 4, &mut rng);
            let gl: Vec<String> = (0..6).map(|i| format!("s{}", i % 3)).collect();
            let pl: Vec<String> = (0..9).map(|i| format!("s{}", i % 3)).collect();
            let pr: Vec<&[f64]> = probes.iter().map(Vec::as_slice).collect();
            let ga: Vec<&[f64]> = gallery.iter().map(Vec::as_slice).collect();
            let m = ScoreMatrix::from_vectors(&pr, pl, &ga, gl).unwrap();
            let c = cmc(&m).unwrap();
            prop_assert!(c.rates.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(*c.rates.last().unwrap(), 1.0);
            let r = roc(&m).unwrap();
            for w in r.points.windows(2) {
                prop_assert!(w[0].far <= w[1].far && w[0].frr >= w[1].frr);
            }
            let e = eer(&r);
            prop_assert!((0.0..=1.0).contains(&e));
        }

        #[test]
        fn probe_permutation_and_scaling_invariance(seed in any::<u64>(), scale in 0.1f64..10.0) {
            let mut rng = RngStream::new(seed);
            let gallery = random_set(5, 4, &mut rng);
            let probes = random_set(8, 4, &mut rng);
            let gl: Vec<String> = (0..5).map(|i| format!("s{i}")).collect();
            let pl: Vec<String> = (0..8).map(|i| format!("s{}", i % 5)).collect();
            let mut perm: Vec<usize> = (0..8).collect();
            rng.shuffle(&mut perm);
            let build = |ps: &[Vec<f64>], labels: Vec<String>, k: f64| {
                let scaled: Vec<Vec<f64>> = ps.iter().map(|v| v.iter().map(|x| x * k).collect()).collect();
                let gs: Vec<Vec<f64>> = gallery.iter().map(|v| v.iter().map(|x| x * k).collect()).collect();
                let pr: Vec<&[f64]> = scaled.iter().map(Vec::as_slice).collect();
                let ga: Vec<&[f64]> = gs.iter().map(Vec::as_slice).collect();
                ScoreMatrix::from_vectors(&pr, labels, &ga, gl.clone()).unwrap()
            };
            let base = build(&probes, pl.clone(), 1.0);
            let permuted_probes: Vec<Vec<f64>> = perm.iter().map(|&i| probes[i].clone()).collect();
            let permuted = build(&permuted_probes, perm.iter().map(|&i| pl[i].clone()).collect(), 1.0);
            let scaled = build(&probes, pl.clone(), scale);

            let (cb, cp, cs) = (cmc(&base).unwrap(), cmc(&permuted).unwrap(), cmc(&scaled).unwrap());
            for (k, &i) in perm.iter().enumerate() {
                prop_assert_eq!(cp.probe_ranks[k], cb.probe_ranks[i]);
            }
            prop_assert_eq!(&cp.rates, &cb.rates);
            prop_assert_eq!(&cs.rates, &cb.rates);
            let (eb, ep, es) = (eer(&roc(&base).unwrap()), eer(&roc(&permuted).unwrap()), eer(&roc(&scaled).unwrap()));
            prop_assert_eq!(eb, ep);
            prop_assert!((eb - es).abs() < 1e-12);
        }
    }
}
