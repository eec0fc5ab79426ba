use serde::{Deserialize, Serialize};

use super::element::{element_stiffness, ElementMatrix};
use super::mesh::Mesh2D;
use crate::error::{Error, Result};
use crate::knapsack::BinarySelection;

pub const DEFAULT_EPS_MIN: f64 = 1e-9;

/// Mesh, material, supports and load of a plane-stress structure.
#[derive(Debug, Clone, PartialEq)]
pub struct ElasticModel {
    mesh: Mesh2D,
    e: f64,
    nu: f64,
    eps_min: f64,
    fixed_dofs: Vec<usize>,
    f: Vec<f64>,
    ke: ElementMatrix,
    /// Global dof → index among the free dofs.
    reduced: Vec<Option<usize>>,
    free_dofs: Vec<usize>,
}

impl ElasticModel {
    pub fn new(
        mesh: Mesh2D,
        e: f64,
        nu: f64,
        eps_min: f64,
        mut fixed_dofs: Vec<usize>,
        f: Vec<f64>,
    ) -> Result<Self> {
        let ke = element_stiffness(e, nu)?;
        if !(eps_min > 0.0 && eps_min < 1e-2) {
            return Err(Error::InvalidParameter(format!(
                "eps_min = {eps_min} must lie in (0, 1e-2)"
            )));
        }
        let m = mesh.n_dofs();
        if f.len() != m {
            return Err(Error::InvalidParameter(format!(
                "load vector has length {}, mesh has {m} dofs",
                f.len()
            )));
        }
        if f.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("load vector is not finite".into()));
        }
        fixed_dofs.sort_unstable();
        fixed_dofs.dedup();
        if fixed_dofs.is_empty() {
            return Err(Error::InvalidParameter("no fixed dofs: structure is unsupported".into()));
        }
        if let Some(&d) = fixed_dofs.last().filter(|d| **d >= m) {
            return Err(Error::InvalidParameter(format!("fixed dof {d} out of range 0..{m}")));
        }
        let mut reduced = vec![None; m];
        let mut free_dofs = Vec::with_capacity(m - fixed_dofs.len());
        let mut fixed = fixed_dofs.iter().peekable();
        for (d, slot) in reduced.iter_mut().enumerate() {
            if fixed.peek() == Some(&&d) {
                fixed.next();
            } else {
                *slot = Some(free_dofs.len());
                free_dofs.push(d);
            }
        }
        Ok(Self {
            mesh,
            e,
            nu,
            eps_min,
            fixed_dofs,
            f,
            ke,
            reduced,
            free_dofs,
        })
    }

    /// Left edge clamped, point load `-load` in y at the bottom-right node.
    pub fn cantilever(mesh: Mesh2D, e: f64, nu: f64, eps_min: f64, load: f64) -> Result<Self> {
        let fixed = (0..2 * (mesh.nely + 1)).collect();
        let mut f = vec![0.0; mesh.n_dofs()];
        f[2 * mesh.node(mesh.nelx, mesh.nely) + 1] = -load;
        Self::new(mesh, e, nu, eps_min, fixed, f)
    }

    pub fn mesh(&self) -> Mesh2D {
        self.mesh
    }

    pub fn young(&self) -> f64 {
        self.e
    }

    pub fn poisson(&self) -> f64 {
        self.nu
    }

    pub fn eps_min(&self) -> f64 {
        self.eps_min
    }

    pub fn fixed_dofs(&self) -> &[usize] {
        &self.fixed_dofs
    }

    pub fn free_dofs(&self) -> &[usize] {
        &self.free_dofs
    }

    pub fn load(&self) -> &[f64] {
        &self.f
    }

    pub fn element_matrix(&self) -> &ElementMatrix {
        &self.ke
    }

    pub(crate) fn reduced_index(&self, dof: usize) -> Option<usize> {
        self.reduced[dof]
    }

    /// Same model with the load multiplied by `s`.
    pub fn with_scaled_load(&self, s: f64) -> Result<Self> {
        let f = self.f.iter().map(|x| s * x).collect();
        Self::new(self.mesh, self.e, self.nu, self.eps_min, self.fixed_dofs.clone(), f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcPreset {
    Cantilever,
}

/// Serializable model description, as read from a run file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub nelx: usize,
    pub nely: usize,
    #[serde(default = "default_young")]
    pub e: f64,
    #[serde(default = "default_nu")]
    pub nu: f64,
    #[serde(default = "default_eps_min")]
    pub eps_min: f64,
    #[serde(default = "default_preset")]
    pub bc_preset: BcPreset,
    #[serde(default = "default_load")]
    pub load: f64,
}

fn default_young() -> f64 {
    1.0
}

fn default_nu() -> f64 {
    0.3
}

fn default_eps_min() -> f64 {
    DEFAULT_EPS_MIN
}

fn default_preset() -> BcPreset {
    BcPreset::Cantilever
}

fn default_load() -> f64 {
    1.0
}

impl ModelConfig {
    pub fn cantilever(nelx: usize, nely: usize) -> Self {
        Self {
            nelx,
            nely,
            e: default_young(),
            nu: default_nu(),
            eps_min: default_eps_min(),
            bc_preset: default_preset(),
            load: default_load(),
        }
    }

    pub fn build(&self) -> Result<ElasticModel> {
        let mesh = Mesh2D::new(self.nelx, self.nely)?;
        match self.bc_preset {
            BcPreset::Cantilever => {
                ElasticModel::cantilever(mesh, self.e, self.nu, self.eps_min, self.load)
            }
        }
    }
}

/// Binary material layout, one entry per element in mesh order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityField {
    mesh: Mesh2D,
    z: BinarySelection,
}

impl DensityField {
    pub fn new(mesh: Mesh2D, z: BinarySelection) -> Result<Self> {
        if z.len() != mesh.n_elements() {
            return Err(Error::InvalidParameter(format!(
                "density field has {} entries, mesh has {} elements",
                z.len(),
                mesh.n_elements()
            )));
        }
        Ok(Self { mesh, z })
    }

    pub fn solid(mesh: Mesh2D) -> Self {
        Self {
            mesh,
            z: BinarySelection::ones(mesh.n_elements()),
        }
    }

    pub fn void(mesh: Mesh2D) -> Self {
        Self {
            mesh,
            z: BinarySelection::zeros(mesh.n_elements()),
        }
    }

    pub fn mesh(&self) -> Mesh2D {
        self.mesh
    }

    pub fn selection(&self) -> &BinarySelection {
        &self.z
    }

    pub fn into_selection(self) -> BinarySelection {
        self.z
    }

    pub fn is_solid(&self, e: usize) -> bool {
        self.z.get(e)
    }

    /// `Σ v_e z_e` with unit element volumes.
    pub fn volume(&self) -> f64 {
        self.z.count_ones() as f64
    }

    /// `z` at `(ex, ey)`, `ey` counted from the top.
    pub fn at(&self, ex: usize, ey: usize) -> bool {
        self.z.get(self.mesh.element(ex, ey))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cantilever_preset() {
        let m = ModelConfig::cantilever(2, 1).build().unwrap();
        assert_eq!(m.fixed_dofs(), &[0, 1, 2, 3]);
        assert_eq!(m.free_dofs().len(), 8);
        // Bottom-right node is (2, 1) → node 5.
        assert_eq!(m.load()[11], -1.0);
        assert_eq!(m.load().iter().filter(|x| **x != 0.0).count(), 1);
        assert_eq!(m.reduced_index(4), Some(0));
        assert_eq!(m.reduced_index(3), None);
    }

    #[test]
    fn validation() {
        let mesh = Mesh2D::new(1, 1).unwrap();
        let f = vec![0.0; 8];
        assert!(ElasticModel::new(mesh, 1.0, 0.3, 1e-9, vec![], f.clone()).is_err());
        assert!(ElasticModel::new(mesh, 1.0, 0.3, 0.0, vec![0], f.clone()).is_err());
        assert!(ElasticModel::new(mesh, 1.0, 0.3, 1e-9, vec![8], f.clone()).is_err());
        assert!(ElasticModel::new(mesh, 1.0, 0.3, 1e-9, vec![0], vec![0.0; 7]).is_err());
        assert!(ElasticModel::new(mesh, 1.0, 0.3, 1e-9, vec![0], vec![f64::NAN; 8]).is_err());
        assert!(DensityField::new(mesh, BinarySelection::ones(2)).is_err());
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let ok: ModelConfig = serde_json::from_str(r#"{"nelx": 4, "nely": 2}"#).unwrap();
        assert_eq!(ok, ModelConfig::cantilever(4, 2));
        assert!(serde_json::from_str::<ModelConfig>(r#"{"nelx": 4, "nely": 2, "E": 1}"#).is_err());
    }
}
