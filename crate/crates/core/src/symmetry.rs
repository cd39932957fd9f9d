//! Killing, homothetic and conformal character of a vector field, the sign
//! of `L_X ḡ` on spacelike vectors and which non-existence results apply.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::spacetime::{classify_vector, dot, CausalClass, MetricModel, ModelKind, VectorFieldSpec};

/// Random spacelike directions tested per sample point.
pub const RANDOM_SPACELIKE: usize = 200;
/// Minimum number of sample points.
pub const MIN_SAMPLES: usize = 100;

/// Axis-aligned coordinate box sampled uniformly from a seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub samples: usize,
    pub seed: u64,
}

impl Region {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, samples: usize, seed: u64) -> Result<Self> {
        if lower.len() != upper.len() || lower.iter().zip(&upper).any(|(a, b)| !(a <= b)) {
            return Err(GeomError::Invalid("region bounds must satisfy lower <= upper per axis".into()));
        }
        if samples < MIN_SAMPLES {
            return Err(GeomError::Invalid(format!("region needs at least {MIN_SAMPLES} samples")));
        }
        Ok(Region {
            lower,
            upper,
            samples,
            seed,
        })
    }

    /// Corners first, then uniform random points.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let m = self.lower.len();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let corners = if m <= 6 { 1usize << m } else { 0 };
        let mut pts: Vec<Vec<f64>> = (0..corners.min(self.samples))
            .map(|c| {
                (0..m)
                    .map(|k| if c & (1 << k) != 0 { self.upper[k] } else { self.lower[k] })
                    .collect()
            })
            .collect();
        while pts.len() < self.samples {
            pts.push(
                (0..m)
                    .map(|k| self.lower[k] + rng.random::<f64>() * (self.upper[k] - self.lower[k]))
                    .collect(),
            );
        }
        pts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SymmetryClass {
    Killing,
    Homothetic,
    Conformal,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FormSign {
    Psd,
    Nsd,
    Indefinite,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "level", rename_all = "snake_case")]
pub enum Certification {
    /// Derived from exact expressions.
    Symbolic,
    /// Evidence from finitely many points.
    Sampled { points: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Future,
    Past,
    Both,
}

impl Orientation {
    fn name(self) -> &'static str {
        match self {
            Orientation::Future => "future",
            Orientation::Past => "past",
            Orientation::Both => "future or past",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CausalSummary {
    pub counts: Vec<(CausalClass, usize)>,
    /// Timelike, or lightlike and nonzero, at every sample.
    pub strictly_causal: bool,
    /// No spacelike samples.
    pub causal: bool,
    /// Common time orientation of the causal samples.
    pub orientation: Option<Orientation>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremId {
    /// Causal field, `L_X ḡ` semidefinite and definite somewhere.
    DefiniteSomewhere,
    /// Strictly causal field, `L_X ḡ` semidefinite.
    StrictlySemidefinite,
    /// Strictly causal Killing field.
    Killing,
    /// Strictly causal conformal field with signed factor.
    Conformal,
    /// As `Conformal` with factor not identically zero.
    ConformalNonzero,
    /// Non-contracting or non-expanding orthogonal splitting.
    Splitting,
}

#[derive(Debug, Clone, Serialize)]
pub struct Hypothesis {
    pub name: String,
    pub holds: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremVerdict {
    pub theorem: TheoremId,
    pub applies: bool,
    pub hypotheses: Vec<Hypothesis>,
    /// Orientation of the excluded causal mean curvature.
    pub orientation: Option<Orientation>,
    /// The exclusion covers `H⃗ ≡ 0`.
    pub includes_extremal: bool,
    pub excluded: Option<String>,
    pub certification: Certification,
    pub witness: Option<Vec<f64>>,
}

impl TheoremVerdict {
    /// Whether a compact spacelike submanifold whose mean curvature is
    /// causal with the given orientation everywhere is excluded.
    pub fn excludes(&self, orientation: Orientation, identically_zero: bool) -> bool {
        self.applies
            && (identically_zero <= self.includes_extremal)
            && match self.orientation {
                Some(Orientation::Both) => true,
                Some(o) => o == orientation,
                None => false,
            }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SymmetryReport {
    pub classification: SymmetryClass,
    /// `ρ = tr(ḡ⁻¹ L_X ḡ) / (2m)` extremes over the sample.
    pub rho_min: f64,
    pub rho_max: f64,
    /// Exact `ρ` when the Lie derivative is a constant multiple of a
    /// constant metric.
    pub rho_symbolic: Option<f64>,
    /// `max ‖L_X ḡ - 2ρ ḡ‖`.
    pub conformal_residual: f64,
    pub conformal_tolerance: f64,
    pub lie_sign: FormSign,
    pub lie_certification: Certification,
    /// First sample where `L_X ḡ` is positive (negative) definite on
    /// every tested spacelike direction.
    pub positive_definite_at: Option<Vec<f64>>,
    pub negative_definite_at: Option<Vec<f64>>,
    pub causal: CausalSummary,
    /// `(∂_t β ≤ 0, ∂_t g_t ⪰ 0)` and the reverse, for split models.
    pub non_contracting: Option<bool>,
    pub non_expanding: Option<bool>,
    pub samples: usize,
    pub theorems: Vec<TheoremVerdict>,
}

struct PointAnalysis {
    g_scale: f64,
    l_scale: f64,
    rho: f64,
    residual: f64,
    class: CausalClass,
    /// Extreme Rayleigh quotients `L(v,v)/ḡ(v,v)` over tested directions.
    min_q: f64,
    max_q: f64,
    split: Option<(f64, f64, f64)>,
}

/// Basis of the `ḡ`-orthogonal complement of the timelike `f`.
fn complement_basis(g: &DMatrix<f64>, f: &[f64]) -> Vec<Vec<f64>> {
    let m = g.nrows();
    let ff = dot(g, f, f);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for k in 0..m {
        let mut e = vec![0.0; m];
        e[k] = 1.0;
        let c = dot(g, &e, f) / ff;
        let mut v: Vec<f64> = e.iter().zip(f).map(|(a, b)| a - c * b).collect();
        for b in &basis {
            let p = dot(g, &v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let n = dot(g, &v, &v);
        if n > 1e-10 {
            let s = n.sqrt();
            basis.push(v.into_iter().map(|x| x / s).collect());
        }
        if basis.len() + 1 == m {
            break;
        }
    }
    basis
}

fn analyze_point(model: &MetricModel, x: &crate::spacetime::VectorField, p: &[f64], seed: u64) -> Result<PointAnalysis> {
    let m = model.dim();
    let g = model.metric_at(p)?;
    let l = model.lie_derivative_metric(x, p)?;
    let ginv = g.clone().try_inverse().ok_or_else(|| GeomError::SingularMetric(p.to_vec()))?;
    let rho = (&ginv * &l).trace() / (2.0 * m as f64);
    let residual = (&l - &g * (2.0 * rho)).amax();
    let xv = x.value_at(p)?;
    let f = model.future_field().value_at(p)?;
    let class = classify_vector(&g, &f, &xv, None);
    // a timelike reference: the future field, or the negative eigendirection
    // of ḡ when the future field is lightlike
    let f = if dot(&g, &f, &f) < -1e-8 * g.amax() * f.iter().map(|c| c * c).sum::<f64>() {
        f
    } else {
        let eig = SymmetricEigen::new(g.clone());
        let k = eig.eigenvalues.imin();
        eig.eigenvectors.column(k).iter().copied().collect()
    };
    let basis = complement_basis(&g, &f);
    let k = basis.len();
    let mut lw = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in 0..k {
            lw[(i, j)] = dot(&l, &basis[i], &basis[j]);
        }
    }
    let ev = SymmetricEigen::new(lw).eigenvalues;
    let (mut min_q, mut max_q) = (ev.min(), ev.max());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ff = -dot(&g, &f, &f);
    for _ in 0..RANDOM_SPACELIKE {
        let w: Vec<f64> = (0..k).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let wn = w.iter().map(|c| c * c).sum::<f64>().sqrt();
        if wn < 1e-8 {
            continue;
        }
        // spacelike: |α|² ff < |w|²
        let alpha = (rng.random::<f64>() * 2.0 - 1.0) * 0.99 * wn / ff.sqrt();
        let v: Vec<f64> = (0..m)
            .map(|a| alpha * f[a] + (0..k).map(|i| w[i] * basis[i][a]).sum::<f64>())
            .collect();
        let q = dot(&l, &v, &v) / dot(&g, &v, &v);
        min_q = min_q.min(q);
        max_q = max_q.max(q);
    }
    let split = if model.kind() == ModelKind::OrthogonalSplitted {
        let dt = &model.field().first_derivatives_at(p)?[0];
        let dbeta = -dt[(0, 0)];
        let spatial = dt.view((1, 1), (m - 1, m - 1)).into_owned();
        let se = SymmetricEigen::new(spatial).eigenvalues;
        Some((dbeta, se.min(), se.max()))
    } else {
        None
    };
    Ok(PointAnalysis {
        g_scale: g.amax(),
        l_scale: l.amax(),
        rho,
        residual,
        class,
        min_q,
        max_q,
        split,
    })
}

/// Symbolic `ρ` when every `L_X ḡ` and `ḡ` component is constant and
/// `L_X ḡ = 2ρ ḡ` exactly.
fn symbolic_rho(model: &MetricModel, x: &VectorFieldSpec) -> Result<Option<f64>> {
    let lie = model.field().lie_derivative_exprs(x)?;
    if lie.iter().flatten().all(|e| e.is_zero()) {
        return Ok(Some(0.0));
    }
    let g = model.field().component_exprs();
    let mut rho: Option<f64> = None;
    for (lr, gr) in lie.iter().zip(g) {
        for (le, ge) in lr.iter().zip(gr) {
            match (le.as_constant(), ge.as_constant()) {
                (Some(a), Some(b)) if b != 0.0 => {
                    let r = a / (2.0 * b);
                    if rho.is_some_and(|q| q != r) {
                        return Ok(None);
                    }
                    rho = Some(r);
                }
                (Some(a), Some(_)) if a == 0.0 => {}
                _ => return Ok(None),
            }
        }
    }
    Ok(rho)
}

/// Sample `X` over the region and assemble the report, including the
/// theorem verdicts.
pub fn analyze_vector_field(model: &MetricModel, x: &VectorFieldSpec, region: &Region) -> Result<SymmetryReport> {
    let m = model.dim();
    if region.lower.len() != m || x.components.len() != m {
        return Err(GeomError::Invalid(format!("region and vector field must have {m} components")));
    }
    let field = x.bind(model.coords())?;
    let points = region.points();
    let analyses = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| analyze_point(model, &field, p, region.seed.wrapping_add(1 + i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let g_scale = analyses.iter().map(|a| a.g_scale).fold(0.0, f64::max);
    let l_scale = analyses.iter().map(|a| a.l_scale).fold(0.0, f64::max);
    let tol = 1e-8 * g_scale;
    let sign_tol = 1e-9 * l_scale.max(1.0);
    let rho_min = analyses.iter().map(|a| a.rho).fold(f64::INFINITY, f64::min);
    let rho_max = analyses.iter().map(|a| a.rho).fold(f64::NEG_INFINITY, f64::max);
    let conformal_residual = analyses.iter().map(|a| a.residual).fold(0.0, f64::max);
    let rho_symbolic = symbolic_rho(model, x)?;
    let classification = if let Some(r) = rho_symbolic {
        if r == 0.0 {
            SymmetryClass::Killing
        } else {
            SymmetryClass::Homothetic
        }
    } else if conformal_residual > tol {
        SymmetryClass::None
    } else if rho_min.abs().max(rho_max.abs()) <= tol {
        SymmetryClass::Killing
    } else if rho_max - rho_min <= tol {
        SymmetryClass::Homothetic
    } else {
        SymmetryClass::Conformal
    };
    let witness = |pred: &dyn Fn(&PointAnalysis) -> bool| {
        analyses.iter().zip(&points).find(|(a, _)| pred(a)).map(|(_, p)| p.clone())
    };
    let (lie_sign, lie_certification, positive_definite_at, negative_definite_at) = match rho_symbolic {
        Some(r) => {
            let sign = if r > 0.0 {
                FormSign::Psd
            } else if r < 0.0 {
                FormSign::Nsd
            } else {
                FormSign::Zero
            };
            let first = Some(points[0].clone());
            (
                sign,
                Certification::Symbolic,
                if r > 0.0 { first.clone() } else { None },
                if r < 0.0 { first } else { None },
            )
        }
        None => {
            let pos = analyses.iter().any(|a| a.max_q > sign_tol);
            let neg = analyses.iter().any(|a| a.min_q < -sign_tol);
            let sign = match (pos, neg) {
                (true, true) => FormSign::Indefinite,
                (true, false) => FormSign::Psd,
                (false, true) => FormSign::Nsd,
                (false, false) => FormSign::Zero,
            };
            (
                sign,
                Certification::Sampled { points: points.len() },
                witness(&|a| a.min_q > sign_tol),
                witness(&|a| a.max_q < -sign_tol),
            )
        }
    };
    let classes: Vec<CausalClass> = analyses.iter().map(|a| a.class).collect();
    let mut counts: Vec<(CausalClass, usize)> = Vec::new();
    for c in &classes {
        match counts.iter_mut().find(|(k, _)| k == c) {
            Some(e) => e.1 += 1,
            None => counts.push((*c, 1)),
        }
    }
    let causal = classes.iter().all(|c| *c != CausalClass::Spacelike);
    let strictly_causal = classes
        .iter()
        .all(|c| !matches!(c, CausalClass::Spacelike | CausalClass::Zero));
    let orientation = if !causal {
        None
    } else if classes.iter().all(|c| c.is_future_causal() || *c == CausalClass::Zero) {
        Some(Orientation::Future)
    } else if classes.iter().all(|c| c.is_past_causal() || *c == CausalClass::Zero) {
        Some(Orientation::Past)
    } else {
        None
    };
    let split: Vec<(f64, f64, f64)> = analyses.iter().filter_map(|a| a.split).collect();
    let (non_contracting, non_expanding) = if model.kind() == ModelKind::OrthogonalSplitted {
        let stol = 1e-9 * g_scale.max(1.0);
        (
            Some(split.iter().all(|&(db, lo, _)| db <= stol && lo >= -stol)),
            Some(split.iter().all(|&(db, _, hi)| db >= -stol && hi <= stol)),
        )
    } else {
        (None, None)
    };
    let mut report = SymmetryReport {
        classification,
        rho_min,
        rho_max,
        rho_symbolic,
        conformal_residual,
        conformal_tolerance: tol,
        lie_sign,
        lie_certification,
        positive_definite_at,
        negative_definite_at,
        causal: CausalSummary {
            counts,
            strictly_causal,
            causal,
            orientation,
        },
        non_contracting,
        non_expanding,
        samples: points.len(),
        theorems: Vec::new(),
    };
    report.theorems = theorem_applicability(&report);
    Ok(report)
}

fn hyp(name: &str, holds: bool) -> Hypothesis {
    Hypothesis {
        name: name.into(),
        holds,
    }
}

fn verdict(
    theorem: TheoremId,
    hypotheses: Vec<Hypothesis>,
    orientation: Option<Orientation>,
    includes_extremal: bool,
    certification: Certification,
    witness: Option<Vec<f64>>,
) -> TheoremVerdict {
    let applies = hypotheses.iter().all(|h| h.holds) && orientation.is_some();
    let excluded = applies.then(|| {
        let o = orientation.expect("checked above");
        format!(
            "compact spacelike submanifolds with {} causal mean curvature{}",
            o.name(),
            if includes_extremal {
                ", extremal included"
            } else {
                " not identically zero"
            }
        )
    });
    TheoremVerdict {
        theorem,
        applies,
        hypotheses,
        orientation: if applies { orientation } else { None },
        includes_extremal: applies && includes_extremal,
        excluded,
        certification,
        witness: if applies { witness } else { None },
    }
}

/// Verdicts for each non-existence result, with the field normalized to
/// the future orientation (a past field `X` is read as `-X`, flipping the
/// sign of `L_X ḡ` and of `ρ`).
pub fn theorem_applicability(report: &SymmetryReport) -> Vec<TheoremVerdict> {
    let c = &report.causal;
    let oriented = c.causal && c.orientation.is_some();
    let strictly = c.strictly_causal && c.orientation.is_some();
    let past = c.orientation == Some(Orientation::Past);
    let sign = match (report.lie_sign, past) {
        (FormSign::Psd, true) => FormSign::Nsd,
        (FormSign::Nsd, true) => FormSign::Psd,
        (s, _) => s,
    };
    let (pd_witness, nd_witness) = if past {
        (report.negative_definite_at.clone(), report.positive_definite_at.clone())
    } else {
        (report.positive_definite_at.clone(), report.negative_definite_at.clone())
    };
    let cert = report.lie_certification;
    let sampled = Certification::Sampled { points: report.samples };

    let semidefinite = matches!(sign, FormSign::Psd | FormSign::Nsd);
    let (definite_orient, definite_witness) = match sign {
        FormSign::Psd if pd_witness.is_some() => (Some(Orientation::Future), pd_witness.clone()),
        FormSign::Nsd if nd_witness.is_some() => (Some(Orientation::Past), nd_witness.clone()),
        _ => (None, None),
    };
    let v_definite = verdict(
        TheoremId::DefiniteSomewhere,
        vec![
            hyp("field causal and time-oriented", oriented),
            hyp("Lie derivative semidefinite on spacelike vectors", semidefinite),
            hyp("Lie derivative definite at a sample point", definite_orient.is_some()),
        ],
        definite_orient,
        true,
        cert,
        definite_witness,
    );
    let semidefinite_orient = match sign {
        FormSign::Psd => Some(Orientation::Future),
        FormSign::Nsd => Some(Orientation::Past),
        FormSign::Zero => Some(Orientation::Both),
        FormSign::Indefinite => None,
    };
    let v_semidefinite = verdict(
        TheoremId::StrictlySemidefinite,
        vec![
            hyp("field strictly causal and time-oriented", strictly),
            hyp("Lie derivative semidefinite on spacelike vectors", semidefinite_orient.is_some()),
        ],
        semidefinite_orient,
        false,
        cert,
        None,
    );
    let v_killing = verdict(
        TheoremId::Killing,
        vec![
            hyp("field strictly causal and time-oriented", strictly),
            hyp("Killing", report.classification == SymmetryClass::Killing),
        ],
        Some(Orientation::Both),
        false,
        cert,
        None,
    );
    let conformal = report.classification != SymmetryClass::None;
    let tol = report.conformal_tolerance;
    let (lo, hi) = if past {
        (-report.rho_max, -report.rho_min)
    } else {
        (report.rho_min, report.rho_max)
    };
    let con_orient = match (lo >= -tol, hi <= tol) {
        (true, true) => Some(Orientation::Both),
        (true, false) => Some(Orientation::Future),
        (false, true) => Some(Orientation::Past),
        (false, false) => None,
    };
    let v_conformal = verdict(
        TheoremId::Conformal,
        vec![
            hyp("field strictly causal and time-oriented", strictly),
            hyp("conformal", conformal),
            hyp("conformal factor of one sign", con_orient.is_some()),
        ],
        con_orient,
        false,
        cert,
        None,
    );
    let nonzero = lo.abs().max(hi.abs()) > tol;
    let v_nonzero = verdict(
        TheoremId::ConformalNonzero,
        vec![
            hyp("field strictly causal and time-oriented", strictly),
            hyp("conformal", conformal),
            hyp("conformal factor of one sign", con_orient.is_some()),
            hyp("conformal factor not identically zero", nonzero),
        ],
        con_orient.filter(|o| *o != Orientation::Both),
        true,
        cert,
        None,
    );
    let split_orient = match (report.non_contracting, report.non_expanding) {
        (Some(true), Some(true)) => Some(Orientation::Both),
        (Some(true), _) => Some(Orientation::Future),
        (_, Some(true)) => Some(Orientation::Past),
        _ => None,
    };
    let v_split = verdict(
        TheoremId::Splitting,
        vec![
            hyp("orthogonal-splitted model", report.non_contracting.is_some()),
            hyp("non-contracting or non-expanding over the sample", split_orient.is_some()),
        ],
        split_orient,
        false,
        sampled,
        None,
    );
    vec![v_definite, v_semidefinite, v_killing, v_conformal, v_nonzero, v_split]
}

impl SymmetryReport {
    pub fn verdict(&self, id: TheoremId) -> &TheoremVerdict {
        self.theorems
            .iter()
            .find(|t| t.theorem == id)
            .expect("every theorem has a verdict")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::FieldExpr;

    fn e(s: &str) -> FieldExpr {
        FieldExpr::parse(s).unwrap()
    }

    fn c(v: f64) -> FieldExpr {
        FieldExpr::constant(v)
    }

    fn field(list: &[&str]) -> VectorFieldSpec {
        VectorFieldSpec::parse(list).unwrap()
    }

    fn region(lower: &[f64], upper: &[f64]) -> Region {
        Region::new(lower.to_vec(), upper.to_vec(), 120, 7).unwrap()
    }

    fn applies(r: &SymmetryReport, id: TheoremId) -> Option<(Orientation, bool)> {
        let v = r.verdict(id);
        v.applies.then(|| (v.orientation.unwrap(), v.includes_extremal))
    }

    #[test]
    fn static_time_translation_is_strictly_causal_killing() {
        let model = MetricModel::standard_static(
            &["t", "x", "y"],
            e("1+0.3*sin(x)*cos(y)"),
            vec![vec![e("1+0.1*cos(x)"), c(0.0)], vec![c(0.0), c(1.0)]],
        )
        .unwrap();
        let r = analyze_vector_field(&model, &field(&["1", "0", "0"]), &region(&[0.0, 0.0, 0.0], &[1.0, 6.0, 6.0])).unwrap();
        assert_eq!(r.classification, SymmetryClass::Killing);
        assert_eq!(r.lie_certification, Certification::Symbolic);
        assert!(r.causal.strictly_causal);
        assert_eq!(r.causal.orientation, Some(Orientation::Future));
        assert_eq!(applies(&r, TheoremId::Killing), Some((Orientation::Both, false)));
        assert_eq!(applies(&r, TheoremId::StrictlySemidefinite), Some((Orientation::Both, false)));
        assert_eq!(applies(&r, TheoremId::DefiniteSomewhere), None);
        assert_eq!(applies(&r, TheoremId::ConformalNonzero), None);
        assert!(r.verdict(TheoremId::Killing).excludes(Orientation::Past, false));
        assert!(!r.verdict(TheoremId::Killing).excludes(Orientation::Future, true));
    }

    #[test]
    fn euler_field_is_homothetic_inside_the_future_cone() {
        let model = MetricModel::minkowski(&["t", "x", "y", "z"]).unwrap();
        let k = field(&["t", "x", "y", "z"]);
        let r = analyze_vector_field(&model, &k, &region(&[2.0, -0.5, -0.5, -0.5], &[3.0, 0.5, 0.5, 0.5])).unwrap();
        assert_eq!(r.classification, SymmetryClass::Homothetic);
        assert_eq!(r.rho_symbolic, Some(1.0));
        assert!((r.rho_min - 1.0).abs() < 1e-12 && (r.rho_max - 1.0).abs() < 1e-12);
        assert!(r.conformal_residual <= 1e-8);
        assert_eq!(r.lie_sign, FormSign::Psd);
        assert!(r.causal.strictly_causal);
        assert_eq!(applies(&r, TheoremId::ConformalNonzero), Some((Orientation::Future, true)));
        assert_eq!(applies(&r, TheoremId::Conformal), Some((Orientation::Future, false)));
        assert_eq!(applies(&r, TheoremId::DefiniteSomewhere), Some((Orientation::Future, true)));
        assert_eq!(applies(&r, TheoremId::Killing), None);
        // the past-directed field -K normalizes to the same verdicts
        let minus = analyze_vector_field(&model, &field(&["-t", "-x", "-y", "-z"]), &region(&[2.0, -0.5, -0.5, -0.5], &[3.0, 0.5, 0.5, 0.5])).unwrap();
        assert_eq!(minus.causal.orientation, Some(Orientation::Past));
        assert_eq!(applies(&minus, TheoremId::ConformalNonzero), Some((Orientation::Future, true)));
        // outside the cone K is spacelike somewhere
        let wide = analyze_vector_field(&model, &k, &region(&[0.0, -1.0, -1.0, -1.0], &[1.0, 1.0, 1.0, 1.0])).unwrap();
        assert!(!wide.causal.causal);
        assert_eq!(applies(&wide, TheoremId::ConformalNonzero), None);
    }

    #[test]
    fn spacelike_translation_applies_nothing() {
        let model = MetricModel::minkowski(&["t", "x", "y"]).unwrap();
        let r = analyze_vector_field(&model, &field(&["0", "1", "0"]), &region(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0])).unwrap();
        assert_eq!(r.classification, SymmetryClass::Killing);
        assert!(!r.causal.causal);
        assert!(r.theorems.iter().all(|t| !t.applies));
    }

    #[test]
    fn nonconstant_conformal_factor() {
        // ḡ = e^{t²} η, L_{∂t} ḡ = 2 t ḡ
        let model = MetricModel::custom(&["t", "x"], vec![vec![e("-exp(t^2)"), c(0.0)], vec![c(0.0), e("exp(t^2)")]]).unwrap();
        let r = analyze_vector_field(&model, &field(&["1", "0"]), &region(&[0.5, 0.0], &[1.0, 1.0])).unwrap();
        assert_eq!(r.classification, SymmetryClass::Conformal);
        assert!((r.rho_min - 0.5).abs() < 1e-12 && (r.rho_max - 1.0).abs() < 1e-12);
        assert!(matches!(r.lie_certification, Certification::Sampled { points: 120 }));
        assert_eq!(applies(&r, TheoremId::ConformalNonzero), Some((Orientation::Future, true)));
    }

    #[test]
    fn lie_sign_on_spacelike_vectors() {
        let model = MetricModel::minkowski(&["t", "x"]).unwrap();
        // L = 2 dx², positive on every spacelike vector
        let r = analyze_vector_field(&model, &field(&["1", "x"]), &region(&[0.0, -0.5], &[1.0, 0.5])).unwrap();
        assert_eq!(r.classification, SymmetryClass::None);
        assert_eq!(r.lie_sign, FormSign::Psd);
        assert!(r.positive_definite_at.is_some());
        assert_eq!(applies(&r, TheoremId::DefiniteSomewhere), Some((Orientation::Future, true)));
        let model3 = MetricModel::minkowski(&["t", "x", "y"]).unwrap();
        let r = analyze_vector_field(&model3, &field(&["1", "x", "-y"]), &region(&[0.0, -0.3, -0.3], &[1.0, 0.3, 0.3])).unwrap();
        assert_eq!(r.lie_sign, FormSign::Indefinite);
        assert_eq!(applies(&r, TheoremId::DefiniteSomewhere), None);
        assert_eq!(applies(&r, TheoremId::StrictlySemidefinite), None);
    }

    #[test]
    fn expanding_splitting_is_non_contracting() {
        let model = MetricModel::orthogonal_splitted(&["t", "x", "y"], c(1.0), vec![vec![e("exp(2*t)"), c(0.0)], vec![c(0.0), e("exp(2*t)")]]).unwrap();
        let r = analyze_vector_field(&model, &field(&["1", "0", "0"]), &region(&[-1.0, 0.0, 0.0], &[1.0, 1.0, 1.0])).unwrap();
        assert_eq!(r.non_contracting, Some(true));
        assert_eq!(r.non_expanding, Some(false));
        assert_eq!(applies(&r, TheoremId::Splitting), Some((Orientation::Future, false)));
        assert!(r.verdict(TheoremId::Splitting).excludes(Orientation::Future, false));
        assert!(!r.verdict(TheoremId::Splitting).excludes(Orientation::Past, false));
        // L_{∂t} ḡ = 2 e^{2t} (dx² + dy²)
        assert_eq!(r.lie_sign, FormSign::Psd);
        assert_eq!(applies(&r, TheoremId::StrictlySemidefinite), Some((Orientation::Future, false)));
    }

    #[test]
    fn region_is_deterministic_and_validated() {
        let a = region(&[0.0, 0.0], &[1.0, 2.0]).points();
        assert_eq!(a, region(&[0.0, 0.0], &[1.0, 2.0]).points());
        assert_eq!(a.len(), 120);
        assert_eq!(a[3], vec![1.0, 2.0]);
        assert!(Region::new(vec![0.0], vec![1.0], 10, 0).is_err());
        assert!(Region::new(vec![1.0], vec![0.0], 200, 0).is_err());
    }
}
