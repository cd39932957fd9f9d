//! Divergence operators on submanifolds and the divergence identity
//! `div(X^T) = div_S(X) - ḡ(X, H)` with its integrated form on closed
//! submanifolds.

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::expr::FieldExpr;
use crate::immersion::{ImmersedSubmanifold, NodeGeometry};
use crate::spacetime::{dot, VectorFieldSpec};

pub const FRAME_DESCRIPTION: &str = "Gram-Schmidt on the coordinate frame, mesh axis order";

/// Orthonormal tangent frame by Gram-Schmidt on `∂_1 x, ..., ∂_n x`.
pub fn orthonormal_frame(g: &NodeGeometry) -> Vec<Vec<f64>> {
    let mut frame: Vec<Vec<f64>> = Vec::with_capacity(g.tangents.len());
    for t in &g.tangents {
        let mut v = t.clone();
        for e in &frame {
            let c = dot(&g.ambient_metric, &v, e);
            for (a, b) in v.iter_mut().zip(e) {
                *a -= c * b;
            }
        }
        let norm = dot(&g.ambient_metric, &v, &v).sqrt();
        frame.push(v.into_iter().map(|x| x / norm).collect());
    }
    frame
}

/// `div_S X = Σ_i ḡ(∇̄_{E_i} X, E_i)` over the Gram-Schmidt frame.
pub fn div_s(imm: &ImmersedSubmanifold, x: &VectorFieldSpec) -> Result<Vec<f64>> {
    div_s_rotated(imm, x, None)
}

/// As [`div_s`], with the orthonormal frame rotated by the orthogonal matrix
/// `rotation` (`E'_i = Σ_j Q_ij E_j`) at every node.
pub fn div_s_rotated(
    imm: &ImmersedSubmanifold,
    x: &VectorFieldSpec,
    rotation: Option<&DMatrix<f64>>,
) -> Result<Vec<f64>> {
    let field = imm.ambient().field();
    let bound = x.bind(field.coords())?;
    let n = imm.dim();
    if let Some(q) = rotation {
        if q.nrows() != n || q.ncols() != n || (q.transpose() * q - DMatrix::identity(n, n)).amax() > 1e-12 {
            return Err(GeomError::Invalid("frame rotation must be an n x n orthogonal matrix".into()));
        }
    }
    imm.geometry()
        .par_iter()
        .map(|g| {
            let gamma = field.christoffel_at(&g.point)?;
            let mut frame = orthonormal_frame(g);
            if let Some(q) = rotation {
                let m = g.point.len();
                frame = (0..n)
                    .map(|i| {
                        (0..m)
                            .map(|a| (0..n).map(|j| q[(i, j)] * frame[j][a]).sum())
                            .collect()
                    })
                    .collect();
            }
            let mut s = 0.0;
            for e in &frame {
                let nabla = bound.covariant_derivative(&g.point, &gamma, e)?;
                s += dot(&g.ambient_metric, &nabla, e);
            }
            Ok(s)
        })
        .collect()
}

/// `(1/√g) ∂_i(√g (X^T)^i)`, the divergence of the tangential part on `(S, g)`.
pub fn tangential_divergence(imm: &ImmersedSubmanifold, x: &VectorFieldSpec) -> Result<Vec<f64>> {
    let bound = x.bind(imm.ambient().field().coords())?;
    let n = imm.dim();
    let mesh = imm.mesh();
    let weighted = imm
        .geometry()
        .par_iter()
        .map(|g| {
            let xv = bound.value_at(&g.point)?;
            Ok(g.tangential_coords(&xv).into_iter().map(|c| c * g.density).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let mut div = vec![0.0; mesh.len()];
    for i in 0..n {
        let comp: Vec<f64> = weighted.iter().map(|w| w[i]).collect();
        for (d, v) in div.iter_mut().zip(mesh.fd_partial(&comp, i)) {
            *d += v;
        }
    }
    Ok(div
        .into_iter()
        .zip(imm.geometry())
        .map(|(d, g)| d / g.density)
        .collect())
}

/// `ḡ(X, H)` per node.
pub fn normal_flux(imm: &ImmersedSubmanifold, x: &VectorFieldSpec) -> Result<Vec<f64>> {
    let bound = x.bind(imm.ambient().field().coords())?;
    imm.geometry()
        .par_iter()
        .map(|g| Ok(dot(&g.ambient_metric, &bound.value_at(&g.point)?, &g.mean_curvature)))
        .collect()
}

/// Pointwise residual `div(X^T) - div_S(X) + ḡ(X, H)`.
pub fn divergence_identity_residual(imm: &ImmersedSubmanifold, x: &VectorFieldSpec) -> Result<Vec<f64>> {
    let tang = tangential_divergence(imm, x)?;
    let ds = div_s(imm, x)?;
    let flux = normal_flux(imm, x)?;
    Ok(tang
        .iter()
        .zip(ds.iter().zip(&flux))
        .map(|(t, (d, f))| t - d + f)
        .collect())
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityReport {
    #[serde(skip)]
    pub pointwise_residual: Vec<f64>,
    pub max_pointwise_residual: f64,
    /// `∫_S {div_S X - ḡ(X, H)} dV`.
    pub integral_value: f64,
    pub div_integral: f64,
    pub flux_integral: f64,
    pub volume: f64,
    pub spacing: f64,
    pub expected_order: u32,
    pub constant: f64,
    /// `constant · spacing²`.
    pub bound: f64,
    pub within_bound: bool,
    /// Quantitative gap when the integral formula fails by more than the
    /// discretization bound.
    pub theorem_witness: Option<f64>,
    pub frame: &'static str,
}

/// Integral formula on a closed submanifold; `constant` sets the accepted
/// bound `constant · spacing²`.
pub fn verify_integral_formula(
    imm: &ImmersedSubmanifold,
    x: &VectorFieldSpec,
    constant: f64,
) -> Result<IdentityReport> {
    if !imm.mesh().is_closed() {
        return Err(GeomError::HasBoundary);
    }
    let ds = div_s(imm, x)?;
    let flux = normal_flux(imm, x)?;
    let tang = tangential_divergence(imm, x)?;
    let integrand: Vec<f64> = ds.iter().zip(&flux).map(|(d, f)| d - f).collect();
    let residual: Vec<f64> = tang.iter().zip(&integrand).map(|(t, i)| t - i).collect();
    let value = imm.integrate(&integrand);
    let spacing = imm.mesh().max_spacing();
    let bound = constant * spacing * spacing;
    let within = value.abs() <= bound;
    Ok(IdentityReport {
        max_pointwise_residual: residual.iter().fold(0.0, |a, v| a.max(v.abs())),
        pointwise_residual: residual,
        integral_value: value,
        div_integral: imm.integrate(&ds),
        flux_integral: imm.integrate(&flux),
        volume: imm.volume(),
        spacing,
        expected_order: 2,
        constant,
        bound,
        within_bound: within,
        theorem_witness: if within { None } else { Some(value.abs() - bound) },
        frame: FRAME_DESCRIPTION,
    })
}

/// Random polynomial vector field of total degree `degree` with
/// coefficients uniform in `[-1, 1]`.
pub fn random_polynomial_field<R: Rng>(coords: &[String], degree: u32, rng: &mut R) -> VectorFieldSpec {
    let m = coords.len();
    let mut monomials: Vec<Vec<u32>> = vec![vec![]];
    for _ in 0..m {
        monomials = monomials
            .into_iter()
            .flat_map(|mono| {
                let used: u32 = mono.iter().sum();
                (0..=degree - used).map(move |k| {
                    let mut next = mono.clone();
                    next.push(k);
                    next
                })
            })
            .collect();
    }
    let comps = (0..m)
        .map(|_| {
            let mut sum = FieldExpr::zero();
            for mono in &monomials {
                let c: f64 = rng.random_range(-1.0..1.0);
                let mut term = FieldExpr::constant(c);
                for (k, &p) in mono.iter().enumerate() {
                    if p > 0 {
                        term = term * crate::expr::pow(FieldExpr::var(&coords[k]), p as i32);
                    }
                }
                sum = sum + term;
            }
            sum
        })
        .collect();
    VectorFieldSpec::new(comps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::immersion::Ambient;
    use crate::mesh::{Axis, ParamMesh};
    use crate::spacetime::MetricModel;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn e(s: &str) -> FieldExpr {
        FieldExpr::parse(s).unwrap()
    }

    fn exprs(list: &[&str]) -> Vec<FieldExpr> {
        list.iter().map(|s| e(s)).collect()
    }

    fn mink4() -> Ambient {
        Ambient::Lorentzian(MetricModel::minkowski(&["t", "x", "y", "z"]).unwrap())
    }

    fn wavy_torus(n: usize) -> ImmersedSubmanifold {
        let mesh = ParamMesh::periodic_box(&[n, n], &[2.0 * PI, 2.0 * PI]).unwrap();
        ImmersedSubmanifold::from_map(
            mesh,
            mink4(),
            &["a", "b"],
            &exprs(&[
                "0.1*sin(a)*cos(b)",
                "(2+0.5*cos(b))*cos(a)",
                "(2+0.5*cos(b))*sin(a)",
                "0.5*sin(b)",
            ]),
        )
        .unwrap()
    }

    #[test]
    fn static_killing_field_has_zero_div_s() {
        let model = MetricModel::standard_static(
            &["t", "x", "y", "z"],
            e("1+0.3*sin(x)*cos(y)"),
            vec![exprs(&["1", "0", "0"]), exprs(&["0", "1", "0"]), exprs(&["0", "0", "1"])],
        )
        .unwrap();
        let mesh = ParamMesh::periodic_box(&[32, 32], &[2.0 * PI, 2.0 * PI]).unwrap();
        let s = ImmersedSubmanifold::from_map(
            mesh,
            Ambient::Lorentzian(model),
            &["a", "b"],
            &exprs(&["0.2*sin(a)*sin(b)", "a", "b", "0.3*cos(a+b)"]),
        )
        .unwrap();
        let h = s.mesh().max_spacing();
        let d = div_s(&s, &VectorFieldSpec::coordinate(4, 0)).unwrap();
        let worst = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!(worst < 5e-3 * h * h * 10.0, "{worst}");
    }

    #[test]
    fn homothetic_field_gives_dimension() {
        let s = wavy_torus(32);
        let k = VectorFieldSpec::parse(&["t", "x", "y", "z"]).unwrap();
        let d = div_s(&s, &k).unwrap();
        assert!(d.iter().all(|v| (v - 2.0).abs() < 1e-12));
    }

    #[test]
    fn frame_independence() {
        let s = wavy_torus(16);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_polynomial_field(&["t".into(), "x".into(), "y".into(), "z".into()], 2, &mut rng);
        let a = div_s(&s, &x).unwrap();
        let th: f64 = 0.7;
        let q = DMatrix::from_row_slice(2, 2, &[th.cos(), -th.sin(), th.sin(), th.cos()]);
        let b = div_s_rotated(&s, &x, Some(&q)).unwrap();
        let scale = a.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-9 * scale);
        }
    }

    #[test]
    fn tangential_divergence_trivial_cases() {
        let mesh = ParamMesh::periodic_box(&[16, 16], &[1.0, 1.0]).unwrap();
        let s = ImmersedSubmanifold::from_map(mesh, mink4(), &["x1", "x2"], &exprs(&["0", "x1", "x2", "0"])).unwrap();
        let normal = VectorFieldSpec::parse(&["1+x^2", "0", "0", "y"]).unwrap();
        assert!(tangential_divergence(&s, &normal).unwrap().iter().all(|v| v.abs() < 1e-12));
        let rot = VectorFieldSpec::parse(&["0", "sin(2*pi*y)", "cos(2*pi*x)", "0"]).unwrap();
        assert!(tangential_divergence(&s, &rot).unwrap().iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn pointwise_identity_is_second_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let coords: Vec<String> = ["t", "x", "y", "z"].iter().map(|s| s.to_string()).collect();
        let x = random_polynomial_field(&coords, 2, &mut rng);
        let r1 = divergence_identity_residual(&wavy_torus(32), &x).unwrap();
        let r2 = divergence_identity_residual(&wavy_torus(64), &x).unwrap();
        let m1 = r1.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let m2 = r2.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        assert!((3.0..5.0).contains(&(m1 / m2)), "ratio {}", m1 / m2);
    }

    #[test]
    fn euler_field_on_flat_torus_is_a_witness() {
        let mesh = ParamMesh::periodic_box(&[16, 16], &[1.0, 2.0]).unwrap();
        let s = ImmersedSubmanifold::from_map(mesh, mink4(), &["x1", "x2"], &exprs(&["0", "x1", "x2", "0"])).unwrap();
        let k = VectorFieldSpec::parse(&["t", "x", "y", "z"]).unwrap();
        let rep = verify_integral_formula(&s, &k, 1.0).unwrap();
        assert!((rep.integral_value - 2.0 * 2.0).abs() < 1e-12);
        assert!(!rep.within_bound);
        assert!(rep.theorem_witness.unwrap() > 3.9);
    }

    #[test]
    fn integral_formula_needs_closed_mesh() {
        let mesh = ParamMesh::new(vec![Axis::bounded(16, 0.0, 1.0), Axis::periodic(16, 1.0)]).unwrap();
        let s = ImmersedSubmanifold::from_map(mesh, mink4(), &["x1", "x2"], &exprs(&["0", "x1", "x2", "0"])).unwrap();
        assert_eq!(
            verify_integral_formula(&s, &VectorFieldSpec::coordinate(4, 0), 1.0).unwrap_err(),
            GeomError::HasBoundary
        );
    }

    #[test]
    fn random_field_has_requested_degree() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let coords: Vec<String> = ["a", "b"].iter().map(|s| s.to_string()).collect();
        let x = random_polynomial_field(&coords, 2, &mut rng);
        let bound = x.bind(&coords).unwrap();
        // third derivatives of a quadratic vanish: check via second differences being affine-free
        let f = |p: [f64; 2]| bound.value_at(&p).unwrap()[0];
        let d2 = |p: f64| f([p + 1.0, 0.0]) - 2.0 * f([p, 0.0]) + f([p - 1.0, 0.0]);
        assert!((d2(0.0) - d2(3.0)).abs() < 1e-12);
    }
}
