//! Plane-stress finite elements on a structured grid of unit squares: the
//! stiffness `K(z)`, the equilibrium solve `K(z)x = f` and per-element strain
//! energies.

mod banded;
mod element;
mod mesh;
mod model;

pub use banded::{BandCholesky, SymBandMatrix};
pub use element::{element_stiffness, ElementMatrix};
pub use mesh::Mesh2D;
pub use model::{BcPreset, DensityField, ElasticModel, ModelConfig, DEFAULT_EPS_MIN};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Free-dof count below which [`solve_displacement`] factorizes directly.
pub const DIRECT_SOLVE_MAX_DOFS: usize = 10_000;
pub const RESIDUAL_TOL: f64 = 1e-8;

/// `K(z)` restricted to the free dofs, with the free-dof numbering of its model.
#[derive(Debug, Clone)]
pub struct StiffnessMatrix {
    k: SymBandMatrix,
    free_dofs: Vec<usize>,
    n_dofs: usize,
}

impl StiffnessMatrix {
    pub fn band(&self) -> &SymBandMatrix {
        &self.k
    }

    pub fn n_free(&self) -> usize {
        self.free_dofs.len()
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.free_dofs.iter().map(|&d| full[d]).collect()
    }

    fn extend(&self, reduced: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.n_dofs];
        for (&d, &v) in self.free_dofs.iter().zip(reduced) {
            full[d] = v;
        }
        full
    }
}

/// `K(z) = Σ_e (ε_min + (1 − ε_min) z_e) Ke` with fixed rows and columns removed.
pub fn assemble(model: &ElasticModel, z: &DensityField) -> Result<StiffnessMatrix> {
    let mesh = model.mesh();
    if z.mesh() != mesh {
        return Err(Error::InvalidParameter(format!(
            "density field is {}x{}, model mesh is {}x{}",
            z.mesh().nelx,
            z.mesh().nely,
            mesh.nelx,
            mesh.nely
        )));
    }
    let n_elem = mesh.n_elements();
    let reduced: Vec<[Option<usize>; 8]> = (0..n_elem)
        .map(|e| mesh.element_dofs(e).map(|d| model.reduced_index(d)))
        .collect();
    let bw = reduced
        .iter()
        .map(|r| {
            let idx = r.iter().flatten();
            let lo = idx.clone().min().copied().unwrap_or(0);
            let hi = idx.max().copied().unwrap_or(0);
            hi - lo
        })
        .max()
        .unwrap_or(0);
    let mut k = SymBandMatrix::zeros(model.free_dofs().len(), bw);
    let ke = model.element_matrix();
    let eps = model.eps_min();
    for (e, dofs) in reduced.iter().enumerate() {
        let scale = if z.is_solid(e) { 1.0 } else { eps };
        for (a, ra) in dofs.iter().enumerate() {
            let Some(i) = *ra else { continue };
            for (b, rb) in dofs.iter().enumerate() {
                let Some(j) = *rb else { continue };
                if j <= i {
                    k.add(i, j, scale * ke[(a, b)]);
                }
            }
        }
    }
    Ok(StiffnessMatrix {
        k,
        free_dofs: model.free_dofs().to_vec(),
        n_dofs: mesh.n_dofs(),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolver {
    /// Direct below [`DIRECT_SOLVE_MAX_DOFS`] free dofs, conjugate gradients above.
    #[default]
    Auto,
    Direct,
    ConjugateGradient,
}

/// Acceptance test applied to the computed displacement.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualCheck {
    /// `‖Kx − f‖ ≤ tol·‖f‖`.
    #[default]
    Relative,
    /// `‖Kx − f‖ ≤ tol·(‖K‖∞‖x‖ + ‖f‖)`.
    ///
    /// Solid islands attached only through void elements have displacements of
    /// order `1/ε_min`, where the relative residual cannot drop below roughly
    /// `u/ε_min` in double precision; this normwise backward error still can.
    Backward,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub solver: LinearSolver,
    pub check: ResidualCheck,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Displacement {
    /// Full-length displacement, zero at fixed dofs.
    pub x: Vec<f64>,
    /// `‖Kx − f‖ / ‖f‖`.
    pub relative_residual: f64,
    /// `‖Kx − f‖ / (‖K‖∞‖x‖ + ‖f‖)`.
    pub backward_error: f64,
    /// Refinement steps for the direct solver, CG iterations otherwise.
    pub iterations: usize,
}

/// Solves `K x = f` to relative residual [`RESIDUAL_TOL`].
pub fn solve_displacement(k: &StiffnessMatrix, f: &[f64]) -> Result<Displacement> {
    solve_displacement_with(k, f, SolveOptions::default())
}

pub fn solve_displacement_with(
    k: &StiffnessMatrix,
    f: &[f64],
    opts: SolveOptions,
) -> Result<Displacement> {
    if f.len() != k.n_dofs {
        return Err(Error::InvalidParameter(format!(
            "load vector has length {}, expected {}",
            f.len(),
            k.n_dofs
        )));
    }
    let fr = k.restrict(f);
    let direct = match opts.solver {
        LinearSolver::Auto => k.n_free() < DIRECT_SOLVE_MAX_DOFS,
        LinearSolver::Direct => true,
        LinearSolver::ConjugateGradient => false,
    };
    let (xr, iterations) = if direct {
        solve_direct(&k.k, &fr)?
    } else {
        solve_pcg(&k.k, &fr, RESIDUAL_TOL, 20 * k.n_free().max(100))?
    };
    let mut r = vec![0.0; xr.len()];
    k.k.mul_vec(&xr, &mut r);
    r.iter_mut().zip(&fr).for_each(|(ri, fi)| *ri -= fi);
    let (rn, fnorm) = (norm(&r), norm(&fr));
    let relative_residual = if fnorm > 0.0 { rn / fnorm } else { rn };
    let denom = k.k.norm_inf() * norm(&xr) + fnorm;
    let backward_error = if denom > 0.0 { rn / denom } else { 0.0 };
    let err = match opts.check {
        ResidualCheck::Relative => relative_residual,
        ResidualCheck::Backward => backward_error,
    };
    if !(err <= RESIDUAL_TOL) {
        return Err(Error::NonConvergence {
            what: "equilibrium solve",
            iterations,
        });
    }
    Ok(Displacement {
        x: k.extend(&xr),
        relative_residual,
        backward_error,
        iterations,
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Banded Cholesky followed by up to three steps of iterative refinement.
fn solve_direct(a: &SymBandMatrix, b: &[f64]) -> Result<(Vec<f64>, usize)> {
    let chol = a.cholesky()?;
    let mut x = b.to_vec();
    chol.solve_in_place(&mut x);
    let bn = norm(b);
    let mut r = vec![0.0; b.len()];
    let mut steps = 0;
    while steps < 3 {
        a.mul_vec(&x, &mut r);
        r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
        if norm(&r) <= 0.01 * RESIDUAL_TOL * bn {
            break;
        }
        chol.solve_in_place(&mut r);
        x.iter_mut().zip(&r).for_each(|(xi, di)| *xi += di);
        steps += 1;
    }
    Ok((x, steps))
}

/// Jacobi-preconditioned conjugate gradients to `‖r‖ ≤ tol‖b‖`.
fn solve_pcg(a: &SymBandMatrix, b: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, usize)> {
    let n = b.len();
    let bn = norm(b);
    let mut x = vec![0.0; n];
    if bn == 0.0 {
        return Ok((x, 0));
    }
    let inv_diag: Vec<f64> = a.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut r = b.to_vec();
    let mut zv: Vec<f64> = r.iter().zip(&inv_diag).map(|(r, d)| r * d).collect();
    let mut p = zv.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &zv);
    // Stop slightly below the target so the recomputed residual also meets it.
    let target = 0.5 * tol * bn;
    for it in 1..=max_iter {
        a.mul_vec(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.iter_mut().zip(&ap).for_each(|(r, ap)| *r -= alpha * ap);
        if norm(&r) <= target {
            return Ok((x, it));
        }
        zv.iter_mut()
            .zip(&r)
            .zip(&inv_diag)
            .for_each(|((z, r), d)| *z = r * d);
        let rz_new = dot(&r, &zv);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&zv).for_each(|(p, z)| *p = z + beta * *p);
    }
    Err(Error::NonConvergence {
        what: "conjugate gradients",
        iterations: max_iter,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementEnergies {
    /// `c_e = ½ x_eᵀ Ke x_e` with the unscaled element matrix.
    pub c: Vec<f64>,
    /// `fᵀx`.
    pub compliance: f64,
    /// `|Σ_e (ε_min + (1 − ε_min) z_e)·2c_e − fᵀx| / |fᵀx|`.
    pub identity_error: f64,
}

pub fn element_energies(model: &ElasticModel, z: &DensityField, x: &[f64]) -> Result<ElementEnergies> {
    let mesh = model.mesh();
    if x.len() != mesh.n_dofs() || z.mesh() != mesh {
        return Err(Error::InvalidParameter(
            "displacement or density field does not match the mesh".into(),
        ));
    }
    let ke = model.element_matrix();
    let eps = model.eps_min();
    let mut stored = 0.0;
    let c: Vec<f64> = (0..mesh.n_elements())
        .map(|e| {
            let xe = nalgebra::SVector::<f64, 8>::from(mesh.element_dofs(e).map(|d| x[d]));
            let ce = (0.5 * xe.dot(&(ke * xe))).max(0.0);
            stored += if z.is_solid(e) { 1.0 } else { eps } * 2.0 * ce;
            ce
        })
        .collect();
    let compliance = dot(model.load(), x);
    let identity_error = if compliance != 0.0 {
        (stored - compliance).abs() / compliance.abs()
    } else {
        stored.abs()
    };
    Ok(ElementEnergies {
        c,
        compliance,
        identity_error,
    })
}

/// Equilibrium at `z`: assembly, solve and energies.
pub fn analyze(model: &ElasticModel, z: &DensityField) -> Result<(Displacement, ElementEnergies)> {
    analyze_with(model, z, SolveOptions::default())
}

pub fn analyze_with(
    model: &ElasticModel,
    z: &DensityField,
    opts: SolveOptions,
) -> Result<(Displacement, ElementEnergies)> {
    let k = assemble(model, z)?;
    let disp = solve_displacement_with(&k, model.load(), opts)?;
    let energies = element_energies(model, z, &disp.x)?;
    Ok((disp, energies))
}
