use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetry tolerance for the interaction matrix, relative to its largest entry.
const SYMMETRY_TOL: f64 = 1e-12;

/// Upper-level knapsack data: `min ½zᵀQz − cᵀz  s.t. vᵀz ≤ V_c, z ∈ {0,1}ⁿ`.
///
/// Without `Q` the instance is the linear knapsack problem.
#[derive(Debug, Clone, PartialEq)]
pub struct KnapsackInstance {
    profits: Vec<f64>,
    volumes: Vec<f64>,
    capacity: f64,
    interaction: Option<DMatrix<f64>>,
    total_volume: f64,
}

impl KnapsackInstance {
    pub fn new(
        profits: Vec<f64>,
        volumes: Vec<f64>,
        capacity: f64,
        interaction: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = profits.len();
        if n == 0 {
            return Err(Error::InvalidInstance("item count must be at least 1".into()));
        }
        if volumes.len() != n {
            return Err(Error::InvalidInstance(format!(
                "profit vector has {} entries but volume vector has {}",
                n,
                volumes.len()
            )));
        }
        if let Some(i) = profits.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidInstance(format!("c[{i}] is not finite")));
        }
        if let Some(i) = volumes.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::InvalidInstance(format!(
                "v[{i}] = {} must be finite and strictly positive",
                volumes[i]
            )));
        }
        if !(capacity.is_finite() && capacity > 0.0) {
            return Err(Error::InvalidInstance(format!(
                "capacity V_c = {capacity} must be finite and strictly positive"
            )));
        }
        if let Some(q) = &interaction {
            if q.nrows() != n || q.ncols() != n {
                return Err(Error::InvalidInstance(format!(
                    "Q is {}x{} but n = {n}",
                    q.nrows(),
                    q.ncols()
                )));
            }
            if q.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidInstance("Q has non-finite entries".into()));
            }
            let scale = q.amax().max(f64::MIN_POSITIVE);
            for i in 0..n {
                for j in 0..i {
                    if (q[(i, j)] - q[(j, i)]).abs() > SYMMETRY_TOL * scale {
                        return Err(Error::InvalidInstance(format!(
                            "Q is not symmetric at ({i}, {j}): {} vs {}",
                            q[(i, j)],
                            q[(j, i)]
                        )));
                    }
                }
            }
        }
        let total_volume = volumes.iter().sum();
        Ok(Self {
            profits,
            volumes,
            capacity,
            interaction,
            total_volume,
        })
    }

    pub fn linear(profits: Vec<f64>, volumes: Vec<f64>, capacity: f64) -> Result<Self> {
        Self::new(profits, volumes, capacity, None)
    }

    pub fn quadratic(
        q: DMatrix<f64>,
        profits: Vec<f64>,
        volumes: Vec<f64>,
        capacity: f64,
    ) -> Result<Self> {
        Self::new(profits, volumes, capacity, Some(q))
    }

    pub fn n(&self) -> usize {
        self.profits.len()
    }

    pub fn profits(&self) -> &[f64] {
        &self.profits
    }

    pub fn volumes(&self) -> &[f64] {
        &self.volumes
    }

    pub fn capacity(&self) -> f64 {
        self.capacity
    }

    pub fn interaction(&self) -> Option<&DMatrix<f64>> {
        self.interaction.as_ref()
    }

    /// `V_0 = Σ v_i`.
    pub fn total_volume(&self) -> f64 {
        self.total_volume
    }

    pub fn is_linear(&self) -> bool {
        self.interaction.is_none()
    }

    pub fn max_abs_profit(&self) -> f64 {
        self.profits.iter().fold(0.0, |m, c| m.max(c.abs()))
    }

    /// `Q`, or the zero matrix for a linear instance.
    pub fn interaction_or_zero(&self) -> DMatrix<f64> {
        self.interaction
            .clone()
            .unwrap_or_else(|| DMatrix::zeros(self.n(), self.n()))
    }

    /// Rejects instances the linear solvers cannot take.
    pub(crate) fn require_linear_positive(&self) -> Result<()> {
        if self.interaction.is_some() {
            return Err(Error::InvalidInstance(
                "linear solver called on an instance with an interaction matrix".into(),
            ));
        }
        if let Some(i) = self.profits.iter().position(|c| *c <= 0.0) {
            return Err(Error::InvalidInstance(format!(
                "c[{i}] = {} must be strictly positive for the linear problem",
                self.profits[i]
            )));
        }
        Ok(())
    }

    pub fn with_capacity(&self, capacity: f64) -> Result<Self> {
        Self::new(
            self.profits.clone(),
            self.volumes.clone(),
            capacity,
            self.interaction.clone(),
        )
    }

    pub fn with_profits(&self, profits: Vec<f64>) -> Result<Self> {
        Self::new(
            profits,
            self.volumes.clone(),
            self.capacity,
            self.interaction.clone(),
        )
    }

    /// `P(z) = ½zᵀQz − cᵀz` (the quadratic term is dropped when `Q` is absent).
    pub fn objective(&self, z: &BinarySelection) -> f64 {
        self.objective_continuous(&z.to_f64())
    }

    pub fn objective_continuous(&self, z: &[f64]) -> f64 {
        debug_assert_eq!(z.len(), self.n());
        let linear: f64 = self.profits.iter().zip(z).map(|(c, z)| c * z).sum();
        let quad = match &self.interaction {
            Some(q) => {
                let mut acc = 0.0;
                for i in 0..self.n() {
                    if z[i] == 0.0 {
                        continue;
                    }
                    let mut row = 0.0;
                    for j in 0..self.n() {
                        row += q[(i, j)] * z[j];
                    }
                    acc += z[i] * row;
                }
                0.5 * acc
            }
            None => 0.0,
        };
        quad - linear
    }

    pub fn volume_of(&self, z: &BinarySelection) -> f64 {
        self.volumes
            .iter()
            .zip(z.as_slice())
            .filter(|(_, &b)| b == 1)
            .map(|(v, _)| v)
            .sum()
    }

    pub fn is_feasible(&self, z: &BinarySelection) -> bool {
        z.len() == self.n() && self.volume_of(z) <= self.capacity + self.volume_tol()
    }

    /// Slack allowed when comparing volumes against the capacity.
    pub fn volume_tol(&self) -> f64 {
        1e-12 * self.total_volume.max(self.capacity)
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let file: InstanceFile = serde_json::from_str(s)?;
        file.try_into()
    }

    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&InstanceFile::from(self)).expect("instance serializes")
    }
}

/// On-disk layout: `{"c": [...], "v": [...], "V_c": x, "Q": [[...]]}` with `Q` optional.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub c: Vec<f64>,
    pub v: Vec<f64>,
    #[serde(rename = "V_c")]
    pub capacity: f64,
    #[serde(rename = "Q", default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<Vec<f64>>>,
}

impl TryFrom<InstanceFile> for KnapsackInstance {
    type Error = Error;

    fn try_from(file: InstanceFile) -> Result<Self> {
        let q = match file.q {
            Some(rows) => {
                let n = rows.len();
                if let Some(i) = rows.iter().position(|r| r.len() != n) {
                    return Err(Error::InvalidInstance(format!(
                        "Q row {i} has {} entries, expected {n}",
                        rows[i].len()
                    )));
                }
                Some(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
            }
            None => None,
        };
        KnapsackInstance::new(file.c, file.v, file.capacity, q)
    }
}

impl From<&KnapsackInstance> for InstanceFile {
    fn from(inst: &KnapsackInstance) -> Self {
        InstanceFile {
            c: inst.profits.clone(),
            v: inst.volumes.clone(),
            capacity: inst.capacity,
            q: inst.interaction.as_ref().map(|q| {
                (0..q.nrows())
                    .map(|i| (0..q.ncols()).map(|j| q[(i, j)]).collect())
                    .collect()
            }),
        }
    }
}

/// A 0-1 selection vector.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<u8>", into = "Vec<u8>")]
pub struct BinarySelection(Vec<u8>);

impl BinarySelection {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if let Some(i) = bits.iter().position(|&b| b > 1) {
            return Err(Error::InvalidParameter(format!(
                "selection entry {i} is {}, expected 0 or 1",
                bits[i]
            )));
        }
        Ok(Self(bits))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0; n])
    }

    pub fn ones(n: usize) -> Self {
        Self(vec![1; n])
    }

    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Self {
        Self(bits.into_iter().map(u8::from).collect())
    }

    /// Low bit of `mask` is item 0.
    pub fn from_mask(mask: u64, n: usize) -> Self {
        Self((0..n).map(|i| ((mask >> i) & 1) as u8).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i] == 1
    }

    pub fn set(&mut self, i: usize, on: bool) {
        self.0[i] = u8::from(on);
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|&b| f64::from(b)).collect()
    }
}

impl TryFrom<Vec<u8>> for BinarySelection {
    type Error = Error;

    fn try_from(bits: Vec<u8>) -> Result<Self> {
        Self::new(bits)
    }
}

impl From<BinarySelection> for Vec<u8> {
    fn from(z: BinarySelection) -> Self {
        z.0
    }
}

impl fmt::Display for BinarySelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, b) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{b}")?;
        }
        write!(f, ")")
    }
}
