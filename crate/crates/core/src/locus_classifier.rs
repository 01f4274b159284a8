//! Cusps, self-intersections and the cusp-to-cusp symbol of a closed plane
//! section of the conjugate locus.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::asymptotics::{asymptotic_section, build_fseries, normalized_point, FSeries, FormulaSet};
use crate::error::{Error, Result};
use crate::expmap_conjugate::{conjugate_section, ConjugateOptions, PlanarCurve};
use crate::metric_model::MetricModel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassifierOptions {
    /// Speed minima below this fraction of the median speed are cusp candidates.
    pub cusp_frac: f64,
    /// Crossings at a smaller angle are flagged non-transversal. For level
    /// sections the threshold is tangency_tol · h.
    pub tangency_tol: f64,
    /// A crossing parameter this close to a cusp parameter is ambiguous.
    pub boundary_tol: f64,
    pub min_samples: usize,
}

impl Default for ClassifierOptions {
    fn default() -> Self {
        ClassifierOptions { cusp_frac: 0.05, tangency_tol: 1e-3, boundary_tol: 1e-6, min_samples: 360 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CuspInfo {
    /// Discrete speed at the minimum relative to the median speed.
    pub speed_ratio: f64,
    /// Angle between the incoming and outgoing chords (π for a clean cusp).
    pub turning: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuspSet {
    pub params: Vec<f64>,
    pub method_data: Vec<CuspInfo>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub phi_a: f64,
    pub phi_b: f64,
    pub point: [f64; 2],
    pub crossing_angle: f64,
    pub transversal: bool,
}

/// A curve parameter → point evaluator used to refine crossings.
pub type Evaluator<'a> = &'a (dyn Fn(f64) -> [f64; 2] + Sync);

fn check_curve(curve: &PlanarCurve, opts: &ClassifierOptions) -> Result<()> {
    if !curve.closed {
        return Err(Error::Invalid("curve must be closed".into()));
    }
    if curve.len() < opts.min_samples {
        return Err(Error::Invalid(format!("curve needs at least {} samples", opts.min_samples)));
    }
    Ok(())
}

/// Parameter step from sample i to i+1, wrapping at the end.
fn dphi(curve: &PlanarCurve, i: usize) -> f64 {
    let n = curve.len();
    let a = curve.samples[i].phi;
    let b = curve.samples[(i + 1) % n].phi;
    if i + 1 == n {
        b + 2.0 * PI - a
    } else {
        b - a
    }
}

fn chord(curve: &PlanarCurve, i: usize) -> [f64; 2] {
    let n = curve.len();
    let (p, q) = (&curve.samples[i], &curve.samples[(i + 1) % n]);
    [q.x - p.x, q.y - p.y]
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn circ_dist(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

fn wrap_2pi(a: f64) -> f64 {
    a.rem_euclid(2.0 * PI)
}

pub fn detect_cusps(curve: &PlanarCurve, opts: &ClassifierOptions) -> Result<CuspSet> {
    check_curve(curve, opts)?;
    let n = curve.len();
    let speed: Vec<f64> = (0..n)
        .map(|i| {
            let c = chord(curve, i);
            c[0].hypot(c[1]) / dphi(curve, i)
        })
        .collect();
    let med = median(speed.clone());
    if med == 0.0 {
        return Err(Error::NoCusps);
    }
    let mut params = Vec::new();
    let mut method_data = Vec::new();
    for i in 0..n {
        let (im, ip) = ((i + n - 1) % n, (i + 1) % n);
        let v = speed[i];
        if !(v < opts.cusp_frac * med && v <= speed[im] && v < speed[ip]) {
            continue;
        }
        let (a, b) = (chord(curve, im), chord(curve, ip));
        let turning = (a[0] * b[1] - a[1] * b[0]).abs().atan2(a[0] * b[0] + a[1] * b[1]);
        if turning < PI / 2.0 {
            continue;
        }
        // Parabola through squared speeds at the chord midpoints.
        let mid = |k: usize| curve.samples[k].phi + 0.5 * dphi(curve, k);
        let (x0, x1, x2) = (mid(i), mid(i) + 0.5 * (dphi(curve, i) + dphi(curve, ip)), mid(i) - 0.5 * (dphi(curve, i) + dphi(curve, im)));
        let (y0, y1, y2) = (v * v, speed[ip].powi(2), speed[im].powi(2));
        let denom = (x1 - x0) * (x2 - x0) * (x1 - x2);
        let a2 = ((y1 - y0) * (x2 - x0) - (y2 - y0) * (x1 - x0)) / denom;
        let a1 = ((y1 - y0) * (x2 - x0).powi(2) - (y2 - y0) * (x1 - x0).powi(2)) / -denom;
        let mut phi = x0;
        if a2 > 0.0 {
            let shift = -a1 / (2.0 * a2);
            if shift.abs() <= 0.5 * (dphi(curve, i) + dphi(curve, ip).max(dphi(curve, im))) {
                phi = x0 + shift;
            }
        }
        params.push(wrap_2pi(phi));
        method_data.push(CuspInfo { speed_ratio: v / med, turning });
    }
    if params.is_empty() {
        return Err(Error::NoCusps);
    }
    let mut idx: Vec<usize> = (0..params.len()).collect();
    idx.sort_by(|&a, &b| params[a].total_cmp(&params[b]));
    Ok(CuspSet { params: idx.iter().map(|&k| params[k]).collect(), method_data: idx.iter().map(|&k| method_data[k]).collect() })
}

/// Local cubic interpolation of a sampled closed curve in its parameter.
pub fn sampled_evaluator(curve: &PlanarCurve) -> impl Fn(f64) -> [f64; 2] + Sync + '_ {
    let n = curve.len();
    let phis: Vec<f64> = curve.samples.iter().map(|s| s.phi).collect();
    let start = phis[0];
    move |phi: f64| {
        let t = start + (phi - start).rem_euclid(2.0 * PI);
        // Segment k with phis[k] ≤ t < phis[k+1] (wrapping).
        let k = match phis.partition_point(|&p| p <= t) {
            0 => n - 1,
            j => j - 1,
        };
        let node = |j: isize| {
            let m = j.rem_euclid(n as isize) as usize;
            let wraps = j.div_euclid(n as isize) as f64;
            let s = &curve.samples[m];
            (s.phi + wraps * 2.0 * PI, [s.x, s.y])
        };
        let nodes = [node(k as isize - 1), node(k as isize), node(k as isize + 1), node(k as isize + 2)];
        let mut out = [0.0; 2];
        for (j, &(pj, vj)) in nodes.iter().enumerate() {
            let mut w = 1.0;
            for (l, &(pl, _)) in nodes.iter().enumerate() {
                if l != j {
                    w *= (t - pl) / (pj - pl);
                }
            }
            out[0] += w * vj[0];
            out[1] += w * vj[1];
        }
        out
    }
}

fn seg_intersect(p: [f64; 2], p2: [f64; 2], q: [f64; 2], q2: [f64; 2]) -> Option<(f64, f64)> {
    let r = [p2[0] - p[0], p2[1] - p[1]];
    let s = [q2[0] - q[0], q2[1] - q[1]];
    let den = r[0] * s[1] - r[1] * s[0];
    if den == 0.0 {
        return None;
    }
    let qp = [q[0] - p[0], q[1] - p[1]];
    let t = (qp[0] * s[1] - qp[1] * s[0]) / den;
    let u = (qp[0] * r[1] - qp[1] * r[0]) / den;
    // Slightly closed intervals so crossings at vertices are not lost;
    // duplicates are merged after refinement.
    let ok = |v: f64| (-1e-9..=1.0 + 1e-9).contains(&v);
    (ok(t) && ok(u)).then_some((t.clamp(0.0, 1.0), u.clamp(0.0, 1.0)))
}

fn derivative(eval: Evaluator, phi: f64) -> [f64; 2] {
    let e = 1e-6;
    let (a, b) = (eval(phi + e), eval(phi - e));
    [(a[0] - b[0]) / (2.0 * e), (a[1] - b[1]) / (2.0 * e)]
}

/// Newton on γ(a) − γ(b) = 0, kept within `reach` of the start.
fn refine(eval: Evaluator, a0: f64, b0: f64, reach: f64, scale: f64) -> Option<(f64, f64)> {
    let (mut a, mut b) = (a0, b0);
    for _ in 0..40 {
        let (pa, pb) = (eval(a), eval(b));
        let f = [pa[0] - pb[0], pa[1] - pb[1]];
        if f[0].hypot(f[1]) <= 1e-13 * scale {
            return Some((a, b));
        }
        let (da, db) = (derivative(eval, a), derivative(eval, b));
        // J = [da, −db]
        let det = -da[0] * db[1] + da[1] * db[0];
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let step_a = (-db[1] * f[0] + db[0] * f[1]) / det;
        let step_b = (-da[1] * f[0] + da[0] * f[1]) / det;
        a -= step_a;
        b -= step_b;
        if (a - a0).abs() > reach || (b - b0).abs() > reach {
            return None;
        }
        if step_a.abs() < 1e-15 && step_b.abs() < 1e-15 {
            break;
        }
    }
    let (pa, pb) = (eval(a), eval(b));
    ((pa[0] - pb[0]).hypot(pa[1] - pb[1]) <= 1e-10 * scale).then_some((a, b))
}

fn angle_between(u: [f64; 2], v: [f64; 2]) -> f64 {
    let cross = (u[0] * v[1] - u[1] * v[0]).abs();
    let dot = (u[0] * v[0] + u[1] * v[1]).abs();
    cross.atan2(dot)
}

/// Threshold below which a crossing counts as tangential.
pub fn tangency_threshold(curve: &PlanarCurve, opts: &ClassifierOptions) -> f64 {
    if curve.level == 0.0 {
        opts.tangency_tol
    } else {
        opts.tangency_tol * curve.h()
    }
}

/// Self-crossings of the closed polyline, refined on `eval` (the sampled
/// cubic interpolant when `None`). Sorted by (φ_a, φ_b) with φ_a < φ_b.
pub fn self_intersections(
    curve: &PlanarCurve,
    eval: Option<Evaluator>,
    opts: &ClassifierOptions,
) -> Result<Vec<Crossing>> {
    if !curve.closed {
        return Err(Error::Invalid("curve must be closed".into()));
    }
    let n = curve.len();
    if n < 4 {
        return Err(Error::Invalid("curve needs at least 4 samples".into()));
    }
    let interp = sampled_evaluator(curve);
    let eval: Evaluator = match eval {
        Some(e) => e,
        None => &interp,
    };
    let pts = curve.points();
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &pts {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    let scale = (hi[0] - lo[0]).hypot(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
    let boxes: Vec<([f64; 2], [f64; 2])> = (0..n)
        .map(|i| {
            let (p, q) = (pts[i], pts[(i + 1) % n]);
            ([p[0].min(q[0]), p[1].min(q[1])], [p[0].max(q[0]), p[1].max(q[1])])
        })
        .collect();
    let threshold = tangency_threshold(curve, opts);
    let mut found: Vec<Crossing> = Vec::new();
    for i in 0..n {
        for j in (i + 2)..n {
            if i == 0 && j == n - 1 {
                continue;
            }
            let (bi, bj) = (&boxes[i], &boxes[j]);
            if bi.1[0] < bj.0[0] || bj.1[0] < bi.0[0] || bi.1[1] < bj.0[1] || bj.1[1] < bi.0[1] {
                continue;
            }
            let Some((t, u)) = seg_intersect(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]) else {
                continue;
            };
            let a0 = curve.samples[i].phi + t * dphi(curve, i);
            let b0 = curve.samples[j].phi + u * dphi(curve, j);
            let reach = 3.0 * dphi(curve, i).max(dphi(curve, j));
            let (a, b) = refine(eval, a0, b0, reach, scale).unwrap_or((a0, b0));
            let (a, b) = (wrap_2pi(a), wrap_2pi(b));
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            if found.iter().any(|c| circ_dist(c.phi_a, a) < 1e-7 && circ_dist(c.phi_b, b) < 1e-7 || circ_dist(c.phi_a, b) < 1e-7 && circ_dist(c.phi_b, a) < 1e-7) {
                continue;
            }
            let point = eval(a);
            let angle = angle_between(derivative(eval, a), derivative(eval, b));
            found.push(Crossing { phi_a: a, phi_b: b, point, crossing_angle: angle, transversal: angle >= threshold });
        }
    }
    found.sort_by(|x, y| x.phi_a.total_cmp(&y.phi_a).then(x.phi_b.total_cmp(&y.phi_b)));
    Ok(found)
}

pub const S1: [u32; 6] = [4, 2, 2, 4, 2, 0];
pub const S2: [u32; 6] = [4, 2, 2, 2, 2, 2];
pub const S3: [u32; 6] = [0, 2, 2, 2, 2, 2];
pub const S4: [u32; 6] = [1, 1, 2, 0, 0, 2];
pub const S5: [u32; 6] = [2, 1, 1, 2, 2, 2];
pub const S6: [u32; 6] = [3, 1, 2, 2, 0, 2];
pub const S7: [u32; 6] = [4, 1, 1, 4, 0, 0];

/// Entries 2sᵢ (doubled, so half-integers stay integral).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Symbol {
    pub entries: Vec<u32>,
    pub canonical: bool,
}

impl Symbol {
    pub fn new(entries: Vec<u32>) -> Self {
        Symbol { entries, canonical: false }
    }

    /// Lexicographic minimum over rotations of the entries and of their reversal.
    pub fn canonical(&self) -> Symbol {
        let n = self.entries.len();
        let mut best = self.entries.clone();
        let mut rev = self.entries.clone();
        rev.reverse();
        for seq in [&self.entries, &rev] {
            for r in 0..n {
                let cand: Vec<u32> = (0..n).map(|k| seq[(k + r) % n]).collect();
                if cand < best {
                    best = cand;
                }
            }
        }
        Symbol { entries: best, canonical: true }
    }

    pub fn crossing_endpoints(&self) -> u32 {
        self.entries.iter().sum()
    }

    /// Name of the admissible symbol this equals, if any.
    pub fn matches(&self) -> Option<&'static str> {
        let c = self.canonical();
        [("S1", S1), ("S2", S2), ("S3", S3), ("S4", S4), ("S5", S5), ("S6", S6), ("S7", S7)]
            .into_iter()
            .find(|(_, s)| Symbol::new(s.to_vec()).canonical().entries == c.entries)
            .map(|(n, _)| n)
    }

    /// Entries as rationals, e.g. "(1/2,1/2,1,0,0,1)".
    pub fn display(&self) -> String {
        let parts: Vec<String> =
            self.entries.iter().map(|&e| if e % 2 == 0 { format!("{}", e / 2) } else { format!("{e}/2") }).collect();
        format!("({})", parts.join(","))
    }
}

/// Symbol from cusp parameters and transversal crossings: entry i counts
/// crossing parameters in the open arc from cusp i to cusp i+1.
pub fn symbol_from(cusps: &CuspSet, crossings: &[Crossing], opts: &ClassifierOptions) -> Result<Symbol> {
    let c = &cusps.params;
    let m = c.len();
    if m < 3 {
        return Err(Error::Invalid("symbol needs at least 3 cusps".into()));
    }
    let mut entries = vec![0u32; m];
    for x in crossings.iter().filter(|x| x.transversal) {
        for phi in [x.phi_a, x.phi_b] {
            if c.iter().any(|&ci| {
                let d = (phi - ci).rem_euclid(2.0 * PI);
                d.min(2.0 * PI - d) <= opts.boundary_tol
            }) {
                return Err(Error::DegenerateArcBoundary);
            }
            // Arc k spans (c[k], c[k+1]); arc m−1 wraps through 2π.
            let k = match c.partition_point(|&ci| ci < phi) {
                0 => m - 1,
                j => j - 1,
            };
            entries[k] += 1;
        }
    }
    Ok(Symbol::new(entries).canonical())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionClassification {
    pub level: f64,
    pub epsilon: i8,
    pub cusps: CuspSet,
    pub crossings: Vec<Crossing>,
    pub symbol: Symbol,
    pub matches: String,
}

impl SectionClassification {
    pub fn transversal_count(&self) -> usize {
        self.crossings.iter().filter(|c| c.transversal).count()
    }
}

pub fn classify_section(curve: &PlanarCurve, eval: Option<Evaluator>, opts: &ClassifierOptions) -> Result<SectionClassification> {
    let cusps = detect_cusps(curve, opts)?;
    let crossings = self_intersections(curve, eval, opts)?;
    let symbol = symbol_from(&cusps, &crossings, opts)?;
    let matches = symbol.matches().unwrap_or("other").to_string();
    Ok(SectionClassification { level: curve.level, epsilon: curve.epsilon(), cusps, crossings, symbol, matches })
}

/// Normalized asymptotic section at level c and its classification, with
/// crossings refined on the closed-form series.
pub fn classify_asymptotic(fs: &FSeries, c: f64, n_phi: usize, opts: &ClassifierOptions) -> Result<SectionClassification> {
    let curve = asymptotic_section(fs, c, n_phi, true)?;
    let h = curve.h();
    let eval = move |phi: f64| normalized_point(fs, phi, h);
    classify_section(&curve, Some(&eval), opts)
}

/// How a section is computed for [`check_full_locus`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum SectionSource {
    Asymptotic { formula: FormulaSet },
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullLocusReport {
    pub plus: SectionClassification,
    pub minus: SectionClassification,
    pub symmetric: bool,
    pub message: String,
}

/// Classifies the sections at ±c and compares their canonical symbols.
pub fn check_full_locus(
    m: &MetricModel,
    c: f64,
    n_phi: usize,
    source: SectionSource,
    conj: &ConjugateOptions,
    opts: &ClassifierOptions,
) -> Result<FullLocusReport> {
    let c = c.abs();
    let section = |level: f64| -> Result<SectionClassification> {
        match source {
            SectionSource::Asymptotic { formula } => {
                let fs = build_fseries(m.invariants(), if level > 0.0 { 1 } else { -1 }, formula)?;
                classify_asymptotic(&fs, level, n_phi, opts)
            }
            SectionSource::Numeric => classify_section(&conjugate_section(m, level, n_phi, conj)?, None, opts),
        }
    };
    let plus = section(c)?;
    let minus = section(-c)?;
    let symmetric = plus.symbol == minus.symbol;
    let message = if symmetric {
        format!("symbols agree: {}", plus.symbol.display())
    } else {
        format!("epsilon-asymmetry detected: {} vs {}", plus.symbol.display(), minus.symbol.display())
    };
    Ok(FullLocusReport { plus, minus, symmetric, message })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expmap_conjugate::{phi_grid, CurveSample};

    fn synthetic(n: usize, f: impl Fn(f64) -> [f64; 2]) -> PlanarCurve {
        PlanarCurve {
            level: 0.0,
            samples: phi_grid(n)
                .into_iter()
                .map(|phi| {
                    let [x, y] = f(phi);
                    CurveSample { phi, x, y }
                })
                .collect(),
            closed: true,
        }
    }

    #[test]
    fn circle_has_no_cusps() {
        let c = synthetic(720, |p| [p.cos(), p.sin()]);
        assert_eq!(detect_cusps(&c, &ClassifierOptions::default()), Err(Error::NoCusps));
    }

    #[test]
    fn astroid_cusps() {
        let c = synthetic(720, |p| [p.cos().powi(3), p.sin().powi(3)]);
        let cs = detect_cusps(&c, &ClassifierOptions::default()).unwrap();
        assert_eq!(cs.params.len(), 4);
        for (k, p) in cs.params.iter().enumerate() {
            assert!((p - k as f64 * PI / 2.0).abs() < 1e-6, "{p}");
        }
        assert!(self_intersections(&c, None, &ClassifierOptions::default()).unwrap().is_empty());
    }

    #[test]
    fn figure_eight_crossing() {
        let f = |p: f64| [(2.0 * p).sin(), p.sin()];
        let c = synthetic(720, f);
        let xs = self_intersections(&c, Some(&f), &ClassifierOptions::default()).unwrap();
        assert_eq!(xs.len(), 1);
        let x = xs[0];
        assert!(x.point[0].abs() < 1e-10 && x.point[1].abs() < 1e-10);
        assert!(x.phi_a.abs() < 1e-9 && (x.phi_b - PI).abs() < 1e-9);
        assert!(x.transversal);
        // Interpolated refinement agrees.
        let xs = self_intersections(&c, None, &ClassifierOptions::default()).unwrap();
        assert_eq!(xs.len(), 1);
        assert!(xs[0].point[0].abs() < 1e-8);
    }

    #[test]
    fn canonical_symbol() {
        let s = Symbol::new(vec![2, 0, 4, 2, 2, 4]);
        let c = s.canonical();
        assert_eq!(c.entries, vec![0, 2, 4, 2, 2, 4]);
        assert_eq!(c.canonical(), c);
        assert_eq!(s.matches(), Some("S1"));
        assert_eq!(Symbol::new(S4.to_vec()).display(), "(1/2,1/2,1,0,0,1)");
        assert_eq!(Symbol::new(vec![0; 4]).matches(), None);
    }

    #[test]
    fn half_entries_from_one_crossing() {
        let cusps = CuspSet {
            params: (0..6).map(|k| k as f64 * PI / 3.0 + 0.1).collect(),
            method_data: vec![CuspInfo { speed_ratio: 0.0, turning: PI }; 6],
        };
        let x = Crossing { phi_a: 0.5, phi_b: 1.5, point: [0.0; 2], crossing_angle: 1.0, transversal: true };
        let s = symbol_from(&cusps, &[x], &ClassifierOptions::default()).unwrap();
        assert_eq!(s.entries, vec![0, 0, 0, 0, 1, 1]);
        assert_eq!(s.display(), "(0,0,0,0,1/2,1/2)");
        let bad = Crossing { phi_a: 0.1, ..x };
        assert_eq!(symbol_from(&cusps, &[bad], &ClassifierOptions::default()), Err(Error::DegenerateArcBoundary));
    }
}
