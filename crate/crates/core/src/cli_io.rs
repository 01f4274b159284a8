//! Run configuration, CSV/JSON/SVG writers and the command driver behind
//! the `didolocus` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::asymptotics::{
    asymptotic_section, audit_report, build_fseries, cl_expansion, numeric_order_audit, wedge_identity_residuals,
    FormulaSet,
};
use crate::error::{Error, Result};
use crate::expmap_conjugate::{
    conjugate_section_points, first_conjugate, phi_grid, wave_front, ConjugateOptions, FrontPoint, PlanarCurve,
};
use crate::geodesic_flow::{integrate_with_step, LaunchSpec, Trajectory, DEFAULT_MAX_STEP, DEFAULT_TOL};
use crate::locus_classifier::{check_full_locus, ClassifierOptions, SectionClassification, SectionSource};
use crate::metric_model::{MetricModel, MetricSpec};
use crate::stratification::{classify, Root, StratTolerances, StratumReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricSource {
    File { file: PathBuf },
    Inline(MetricSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub ode_tol: f64,
    pub conj_tol: f64,
    pub level_tol: f64,
    pub max_step: f64,
    pub strat_tol: f64,
    pub circle_tol: f64,
    pub cluster_tol: f64,
    pub common_tol: f64,
    pub cusp_frac: f64,
    pub tangency_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        let c = ConjugateOptions::default();
        let s = StratTolerances::default();
        let k = ClassifierOptions::default();
        Tolerances {
            ode_tol: DEFAULT_TOL,
            conj_tol: c.tol,
            level_tol: c.level_tol,
            max_step: DEFAULT_MAX_STEP,
            strat_tol: s.strat_tol,
            circle_tol: s.circle_tol,
            cluster_tol: s.cluster_tol,
            common_tol: s.common_tol,
            cusp_frac: k.cusp_frac,
            tangency_tol: k.tangency_tol,
        }
    }
}

impl Tolerances {
    fn validate(&self) -> Result<()> {
        let all = [
            self.ode_tol,
            self.conj_tol,
            self.level_tol,
            self.max_step,
            self.strat_tol,
            self.circle_tol,
            self.cluster_tol,
            self.common_tol,
            self.cusp_frac,
            self.tangency_tol,
        ];
        if all.iter().all(|t| *t > 0.0 && t.is_finite()) {
            Ok(())
        } else {
            Err(Error::Invalid("all tolerances must be positive and finite".into()))
        }
    }

    pub fn conjugate(&self) -> ConjugateOptions {
        ConjugateOptions { tol: self.conj_tol, level_tol: self.level_tol, max_step: self.max_step, ..Default::default() }
    }

    pub fn strat(&self) -> StratTolerances {
        StratTolerances {
            strat_tol: self.strat_tol,
            circle_tol: self.circle_tol,
            cluster_tol: self.cluster_tol,
            common_tol: self.common_tol,
        }
    }

    pub fn classifier(&self) -> ClassifierOptions {
        ClassifierOptions { cusp_frac: self.cusp_frac, tangency_tol: self.tangency_tol, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeodesicParams {
    pub phi: f64,
    pub rho: f64,
    pub s_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontParams {
    pub s: f64,
    pub n_phi: usize,
    #[serde(default = "one")]
    pub n_r: usize,
    pub rho_min: f64,
    #[serde(default)]
    pub rho_max: Option<f64>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConjugateParams {
    pub n_phi: usize,
    pub rhos: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectionParams {
    pub levels: Vec<f64>,
    #[serde(default = "default_n_phi")]
    pub n_phi: usize,
    #[serde(default = "default_formula")]
    pub formula: FormulaSet,
}

fn default_n_phi() -> usize {
    720
}

fn default_formula() -> FormulaSet {
    FormulaSet::Reconciled
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditParams {
    /// Largest h of the numerical order check (h and h/2 are used).
    #[serde(default = "default_audit_h")]
    pub h: f64,
    #[serde(default = "default_audit_phis")]
    pub n_phi: usize,
    #[serde(default = "default_n_phi")]
    pub identity_grid: usize,
}

impl Default for AuditParams {
    fn default() -> Self {
        AuditParams { h: default_audit_h(), n_phi: default_audit_phis(), identity_grid: default_n_phi() }
    }
}

fn default_audit_h() -> f64 {
    0.05
}

fn default_audit_phis() -> usize {
    8
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Asymptotic,
    Numeric,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyParams {
    pub level: f64,
    #[serde(default = "default_n_phi")]
    pub n_phi: usize,
    #[serde(default = "default_source")]
    pub source: Source,
    #[serde(default = "default_formula")]
    pub formula: FormulaSet,
}

fn default_source() -> Source {
    Source::Asymptotic
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyTerm {
    pub i: u32,
    pub j: u32,
    /// Coefficient c0 + c1 λ.
    #[serde(default)]
    pub c0: f64,
    #[serde(default)]
    pub c1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    pub family: Vec<FamilyTerm>,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub steps: usize,
}

impl SweepParams {
    pub fn metric_at(&self, lambda: f64, quadrature_order: usize) -> Result<MetricModel> {
        let terms: Vec<(u32, u32, f64)> = self.family.iter().map(|t| (t.i, t.j, t.c0 + t.c1 * lambda)).collect();
        MetricModel::from_terms(&terms)?.with_quadrature_order(quadrature_order)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub metric: Option<MetricSource>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub geodesic: Option<GeodesicParams>,
    #[serde(default)]
    pub front: Option<FrontParams>,
    #[serde(default)]
    pub conjugate: Option<ConjugateParams>,
    #[serde(default)]
    pub section: Option<SectionParams>,
    #[serde(default)]
    pub audit: Option<AuditParams>,
    #[serde(default)]
    pub classify: Option<ClassifyParams>,
    #[serde(default)]
    pub sweep: Option<SweepParams>,
}

impl RunConfig {
    /// Parses a config; relative metric file paths resolve against `base`.
    pub fn from_json(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Invalid(format!("config: {e}")))?;
        if let (Some(MetricSource::File { file }), Some(b)) = (&mut cfg.metric, base) {
            if file.is_relative() {
                *file = b.join(&*file);
            }
        }
        cfg.tolerances.validate()?;
        if let Some(s) = &cfg.sweep {
            if !(s.lambda_min.is_finite() && s.lambda_max.is_finite()) || s.lambda_min > s.lambda_max || s.steps < 2 {
                return Err(Error::Invalid("sweep range must be finite with at least 2 steps".into()));
            }
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Invalid(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, path.parent())
    }

    pub fn metric(&self) -> Result<MetricModel> {
        let spec = match &self.metric {
            None => return Err(Error::Invalid("config has no metric".into())),
            Some(MetricSource::Inline(s)) => s.clone(),
            Some(MetricSource::File { file }) => {
                let text = fs::read_to_string(file).map_err(|e| Error::Invalid(format!("{}: {e}", file.display())))?;
                serde_json::from_str(&text).map_err(|e| Error::Invalid(format!("metric file: {e}")))?
            }
        };
        spec.build()
    }

    fn need<'a, T>(v: &'a Option<T>, name: &str) -> Result<&'a T> {
        v.as_ref().ok_or_else(|| Error::Invalid(format!("config has no \"{name}\" block")))
    }
}

/// Fixed float format for all artifacts.
pub fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn row(values: &[f64]) -> String {
    values.iter().map(|v| fmt_f(*v)).collect::<Vec<_>>().join(",")
}

pub fn trajectory_csv(t: &Trajectory) -> String {
    let mut s = String::from("s,x,y,w,pt,qt,rr\n");
    for p in &t.samples {
        s.push_str(&row(&[p.s, p.x, p.y, p.w, p.pt, p.qt, p.rr]));
        s.push('\n');
    }
    s
}

pub fn section_csv(c: &PlanarCurve) -> String {
    let mut s = format!("# level={} epsilon={:+}\nphi,x,y\n", fmt_f(c.level), c.epsilon());
    for p in &c.samples {
        s.push_str(&row(&[p.phi, p.x, p.y]));
        s.push('\n');
    }
    s
}

pub fn front_csv(pts: &[FrontPoint]) -> String {
    let mut s = String::from("phi,rho,x,y,w\n");
    for p in pts {
        s.push_str(&row(&[p.phi, p.rho, p.x, p.y, p.w]));
        s.push('\n');
    }
    s
}

fn root_json(r: &Root) -> Value {
    json!({"re": r.value.re, "im": r.value.im, "multiplicity": r.multiplicity, "on_unit_circle": r.on_unit_circle})
}

fn cjson(z: Complex64) -> Value {
    json!([z.re, z.im])
}

pub fn stratum_json(r: &StratumReport) -> Value {
    let mut b = serde_json::Map::new();
    for (k, v) in r.bad_sets.iter().enumerate() {
        b.insert(format!("B{k}"), cjson(v.value));
    }
    json!({
        "stratum": r.stratum.name(),
        "b_values": b,
        "ptilde_roots": r.ptilde_roots.roots.iter().map(root_json).collect::<Vec<_>>(),
        "t_roots": r.t_roots.roots.iter().map(root_json).collect::<Vec<_>>(),
        "common_roots": r.ptilde_roots.common_roots_with_t.iter().map(|z| cjson(*z)).collect::<Vec<_>>(),
    })
}

pub fn classification_json(c: &SectionClassification) -> Value {
    json!({
        "level": c.level,
        "epsilon": c.epsilon,
        "cusps": c.cusps.params,
        "crossings": c.crossings.iter().map(|x| json!({
            "phi_a": x.phi_a, "phi_b": x.phi_b, "point": x.point,
            "crossing_angle": x.crossing_angle, "transversal": x.transversal,
        })).collect::<Vec<_>>(),
        "symbol": c.symbol.entries.iter().map(|&e| e as f64 / 2.0).collect::<Vec<_>>(),
        "matches": c.matches,
    })
}

/// Marker drawn on top of a polyline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Marker {
    Cusp([f64; 2]),
    Crossing([f64; 2]),
}

/// Static SVG of polylines (each closed if flagged) with markers; the plot
/// box is scaled to the data and the scale is recorded in a comment.
pub fn svg(title: &str, lines: &[(Vec<[f64; 2]>, bool)], markers: &[Marker]) -> String {
    let size = 600.0;
    let pad = 20.0;
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in lines.iter().flat_map(|(l, _)| l.iter()) {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    if !lo[0].is_finite() {
        lo = [-1.0, -1.0];
        hi = [1.0, 1.0];
    }
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]);
    let span = if span > 0.0 { span } else { 1.0 };
    let k = (size - 2.0 * pad) / span;
    let map = |p: &[f64; 2]| (pad + (p[0] - lo[0]) * k, size - pad - (p[1] - lo[1]) * k);
    let mut s = String::new();
    let _ = writeln!(s, "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{size}\" height=\"{size}\" viewBox=\"0 0 {size} {size}\">");
    let _ = writeln!(s, "<!-- {title}; scale {} units per px; origin ({}, {}) -->", fmt_f(1.0 / k), fmt_f(lo[0]), fmt_f(lo[1]));
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    for (line, closed) in lines {
        let pts: Vec<String> = line.iter().map(&map).map(|(x, y)| format!("{x:.3},{y:.3}")).collect();
        let tag = if *closed { "polygon" } else { "polyline" };
        let _ = writeln!(s, "<{tag} fill=\"none\" stroke=\"black\" stroke-width=\"0.8\" points=\"{}\"/>", pts.join(" "));
    }
    for m in markers {
        match m {
            Marker::Cusp(p) => {
                let (x, y) = map(p);
                let _ = writeln!(s, "<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"3\" fill=\"red\"/>");
            }
            Marker::Crossing(p) => {
                let (x, y) = map(p);
                let _ = writeln!(s, "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"6\" height=\"6\" fill=\"blue\"/>", x - 3.0, y - 3.0);
            }
        }
    }
    s.push_str("</svg>\n");
    s
}

fn section_svg(c: &PlanarCurve, cls: Option<&SectionClassification>, eval: &dyn Fn(f64) -> [f64; 2]) -> String {
    let mut markers = Vec::new();
    if let Some(cls) = cls {
        markers.extend(cls.cusps.params.iter().map(|&p| Marker::Cusp(eval(p))));
        markers.extend(cls.crossings.iter().filter(|x| x.transversal).map(|x| Marker::Crossing(x.point)));
    }
    svg(&format!("section at level {}", fmt_f(c.level)), &[(c.points(), c.closed)], &markers)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub r2: [f64; 2],
    pub stratum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CCrossing {
    pub lambda: f64,
    pub r2_abs: f64,
    pub stratum: String,
}

/// Strata over the λ grid and the λ values where the family meets C.
pub fn sweep(p: &SweepParams, quadrature_order: usize, tol: &StratTolerances) -> Result<(Vec<SweepRow>, Vec<CCrossing>)> {
    let lam = |k: usize| p.lambda_min + (p.lambda_max - p.lambda_min) * k as f64 / (p.steps - 1) as f64;
    let r2_at = |l: f64| -> Result<Complex64> { Ok(p.metric_at(l, quadrature_order)?.invariants().r2) };
    let mut rows = Vec::with_capacity(p.steps);
    let mut r2s = Vec::with_capacity(p.steps);
    for k in 0..p.steps {
        let l = lam(k);
        let m = p.metric_at(l, quadrature_order)?;
        let inv = *m.invariants();
        rows.push(SweepRow { lambda: l, r2: [inv.r2.re, inv.r2.im], stratum: classify(&inv, tol).stratum.name() });
        r2s.push(inv.r2.norm());
    }
    let mut hits: Vec<CCrossing> = Vec::new();
    for k in 0..p.steps {
        let left = if k > 0 { r2s[k - 1] } else { f64::INFINITY };
        let right = if k + 1 < p.steps { r2s[k + 1] } else { f64::INFINITY };
        if !(r2s[k] <= left && r2s[k] < right) {
            continue;
        }
        // Bisection on the sign of d|r₂|²/dλ over the neighbouring interval.
        let (mut a, mut b) = (lam(k.saturating_sub(1)), lam((k + 1).min(p.steps - 1)));
        let slope = |l: f64, width: f64| -> Result<f64> {
            let d = (width * 1e-3).max(1e-12);
            let (z, zp, zm) = (r2_at(l)?, r2_at(l + d)?, r2_at(l - d)?);
            Ok((z.conj() * (zp - zm)).re)
        };
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            if slope(mid, b - a)? > 0.0 {
                b = mid;
            } else {
                a = mid;
            }
        }
        let l = 0.5 * (a + b);
        let z = r2_at(l)?;
        if z.norm() <= tol.strat_tol {
            let inv = *p.metric_at(l, quadrature_order)?.invariants();
            hits.push(CCrossing { lambda: l, r2_abs: z.norm(), stratum: classify(&inv, tol).stratum.name() });
        }
    }
    Ok((rows, hits))
}

pub const COMMANDS: [&str; 9] = ["geodesic", "front", "conjugate", "section", "asymptotic", "classify", "stratify", "sweep", "compare"];

/// Files written by one command, in order.
pub type Artifacts = Vec<(String, String)>;

/// Computes the artifacts of `command` without touching the filesystem.
pub fn run(command: &str, cfg: &RunConfig) -> Result<Artifacts> {
    let tol = &cfg.tolerances;
    let mut out: Artifacts = Vec::new();
    match command {
        "geodesic" => {
            let g = RunConfig::need(&cfg.geodesic, "geodesic")?;
            let m = cfg.metric()?;
            let launch = LaunchSpec { phi: g.phi, rho: g.rho, s_max: g.s_max, tol: tol.ode_tol };
            let t = integrate_with_step(&m, &launch, false, tol.max_step)?;
            out.push(("trajectory.csv".into(), trajectory_csv(&t)));
        }
        "front" => {
            let f = RunConfig::need(&cfg.front, "front")?;
            let m = cfg.metric()?;
            let pts = wave_front(&m, f.s, f.n_phi, f.n_r, (f.rho_min, f.rho_max.unwrap_or(f.rho_min)))?;
            let rings: Vec<(Vec<[f64; 2]>, bool)> = (0..f.n_r)
                .map(|r| ((0..f.n_phi).map(|k| pts[k * f.n_r + r]).map(|p| [p.x, p.y]).collect(), true))
                .collect();
            out.push(("front.csv".into(), front_csv(&pts)));
            out.push(("front.svg".into(), svg(&format!("wave front at s = {}", fmt_f(f.s)), &rings, &[])));
        }
        "conjugate" => {
            let c = RunConfig::need(&cfg.conjugate, "conjugate")?;
            let m = cfg.metric()?;
            let opts = tol.conjugate();
            let mut s = String::from("phi,rho,s_c,t_c,x,y,w\n");
            for phi in phi_grid(c.n_phi) {
                for &rho in &c.rhos {
                    let p = first_conjugate(&m, phi, rho, &opts)?;
                    s.push_str(&row(&[p.phi, p.rho, p.s_c, p.t_c, p.point[0], p.point[1], p.point[2]]));
                    s.push('\n');
                }
            }
            out.push(("conjugate.csv".into(), s));
        }
        "section" => {
            let sp = RunConfig::need(&cfg.section, "section")?;
            let m = cfg.metric()?;
            for (k, &level) in sp.levels.iter().enumerate() {
                let pts = conjugate_section_points(&m, level, sp.n_phi, &tol.conjugate())?;
                let curve = PlanarCurve {
                    level,
                    samples: pts
                        .iter()
                        .map(|p| crate::expmap_conjugate::CurveSample { phi: p.phi, x: p.point[0], y: p.point[1] })
                        .collect(),
                    closed: true,
                };
                out.push((format!("section_{k}.csv"), section_csv(&curve)));
                out.push((format!("section_{k}.svg"), svg(&format!("section at level {}", fmt_f(level)), &[(curve.points(), true)], &[])));
            }
        }
        "asymptotic" => {
            let sp = RunConfig::need(&cfg.section, "section")?;
            let m = cfg.metric()?;
            let inv = *m.invariants();
            for (k, &level) in sp.levels.iter().enumerate() {
                let fs = build_fseries(&inv, if level > 0.0 { 1 } else { -1 }, sp.formula)?;
                let curve = asymptotic_section(&fs, level, sp.n_phi, false)?;
                out.push((format!("asymptotic_{k}.csv"), section_csv(&curve)));
                out.push((format!("asymptotic_{k}.svg"), svg(&format!("expansion at level {}", fmt_f(level)), &[(curve.points(), true)], &[])));
            }
            let a = cfg.audit.unwrap_or_default();
            let identities = if inv.r2.norm() <= crate::asymptotics::ON_C_TOL {
                let mut v = wedge_identity_residuals(&inv, &phi_grid(a.identity_grid), FormulaSet::Printed)?;
                let mut rec = wedge_identity_residuals(&inv, &phi_grid(a.identity_grid), FormulaSet::Reconciled)?;
                for r in &mut rec {
                    r.identity = format!("[reconciled] {}", r.identity);
                }
                v.extend(rec);
                v
            } else {
                Vec::new()
            };
            let mut orders = numeric_order_audit(&m, FormulaSet::Printed, &phi_grid(a.n_phi), a.h, &tol.conjugate())?;
            let mut rec = numeric_order_audit(&m, FormulaSet::Reconciled, &phi_grid(a.n_phi), a.h, &tol.conjugate())?;
            for r in &mut rec {
                r.identity = format!("[reconciled] {}", r.identity);
            }
            orders.extend(rec);
            out.push(("audit.txt".into(), audit_report(&identities, &orders)));
        }
        "classify" => {
            let cp = RunConfig::need(&cfg.classify, "classify")?;
            let m = cfg.metric()?;
            let source = match cp.source {
                Source::Asymptotic => SectionSource::Asymptotic { formula: cp.formula },
                Source::Numeric => SectionSource::Numeric,
            };
            let rep = check_full_locus(&m, cp.level, cp.n_phi, source, &tol.conjugate(), &tol.classifier())?;
            let v = json!({
                "sections": [classification_json(&rep.plus), classification_json(&rep.minus)],
                "symmetric": rep.symmetric,
                "message": rep.message,
            });
            out.push(("classify.json".into(), pretty(&v)));
        }
        "stratify" => {
            let m = cfg.metric()?;
            out.push(("stratum.json".into(), pretty(&stratum_json(&classify(m.invariants(), &tol.strat())))));
        }
        "sweep" => {
            let sp = RunConfig::need(&cfg.sweep, "sweep")?;
            let order = match &cfg.metric {
                Some(MetricSource::Inline(s)) => s.quadrature_order,
                _ => crate::metric_model::MetricSpec::from_terms(&[]).quadrature_order,
            };
            let (rows, hits) = sweep(sp, order, &tol.strat())?;
            let mut s = String::from("lambda,r2_re,r2_im,r2_abs,stratum\n");
            for r in &rows {
                let _ = writeln!(s, "{},{}", row(&[r.lambda, r.r2[0], r.r2[1], r.r2[0].hypot(r.r2[1])]), r.stratum);
            }
            out.push(("sweep.csv".into(), s));
            out.push(("sweep.json".into(), pretty(&json!({ "c_crossings": hits }))));
        }
        "compare" => {
            let cp = RunConfig::need(&cfg.classify, "classify")?;
            let m = cfg.metric()?;
            let eps: i8 = if cp.level > 0.0 { 1 } else { -1 };
            let fs = build_fseries(m.invariants(), eps, cp.formula)?;
            let pts = conjugate_section_points(&m, cp.level, cp.n_phi, &tol.conjugate())?;
            let mut s = format!("# level={} epsilon={:+}\nphi,x_num,y_num,x_asym,y_asym,residual\n", fmt_f(cp.level), eps);
            for p in &pts {
                let h = (p.point[2].abs() / std::f64::consts::PI).sqrt();
                let a = cl_expansion(&fs, p.phi, h);
                let r = (p.point[0] - a[0]).hypot(p.point[1] - a[1]);
                s.push_str(&row(&[p.phi, p.point[0], p.point[1], a[0], a[1], r]));
                s.push('\n');
            }
            out.push(("compare.csv".into(), s));
        }
        other => return Err(Error::Invalid(format!("unknown command \"{other}\"; expected one of {}", COMMANDS.join(", ")))),
    }
    Ok(out)
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json values serialize");
    s.push('\n');
    s
}

/// Runs `command` and writes its artifacts under `out_dir`.
pub fn run_to_dir(command: &str, cfg: &RunConfig, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let arts = run(command, cfg)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::Invalid(format!("{}: {e}", out_dir.display())))?;
    let mut paths = Vec::new();
    for (name, body) in arts {
        let p = out_dir.join(name);
        fs::write(&p, body).map_err(|e| Error::Invalid(format!("{}: {e}", p.display())))?;
        paths.push(p);
    }
    Ok(paths)
}

/// Section SVG with cusp and crossing markers taken from a classification.
pub fn classified_section_svg(c: &PlanarCurve, cls: &SectionClassification) -> String {
    let eval = crate::locus_classifier::sampled_evaluator(c);
    section_svg(c, Some(cls), &eval)
}
