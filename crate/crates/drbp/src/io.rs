//! `drbp-v1` JSON schema: one document holding a bilevel instance and its
//! ambiguity set. Matrices are dense row-major.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::instance::{BilevelInstance, LeaderSet};
use crate::moments::{AmbiguityDomain, MomentAmbiguity};
use crate::{DrbpError, Result};

pub const FORMAT_VERSION: &str = "drbp-v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DenseMat {
    pub rows: usize,
    pub cols: usize,
    /// Row-major entries, `rows*cols` long.
    pub data: Vec<f64>,
}

impl DenseMat {
    pub fn from_matrix(m: &DMatrix<f64>) -> Self {
        let mut data = Vec::with_capacity(m.nrows() * m.ncols());
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                data.push(m[(i, j)]);
            }
        }
        DenseMat { rows: m.nrows(), cols: m.ncols(), data }
    }

    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(DrbpError::Dimension(format!(
                "dense matrix {}×{} carries {} entries",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LeaderConstraintDoc {
    pub g: Vec<f64>,
    pub rhs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InstanceDoc {
    pub d: usize,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub a: DenseMat,
    pub b_mats: Vec<DenseMat>,
    pub b_vecs: Vec<Vec<f64>>,
    pub c_mat: DenseMat,
    pub c0: Vec<f64>,
    pub v_mat: DenseMat,
    pub v0: Vec<f64>,
    pub w: Vec<f64>,
    pub leader_constraints: Vec<LeaderConstraintDoc>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainDoc {
    Support { w_mat: DenseMat, h: Vec<f64> },
    Scenarios { points: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AmbiguityDoc {
    pub mu0: Vec<f64>,
    pub sigma0: DenseMat,
    pub gamma1: f64,
    pub gamma2: f64,
    pub domain: DomainDoc,
}

/// Top-level document.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemDoc {
    pub version: String,
    pub instance: InstanceDoc,
    pub ambiguity: AmbiguityDoc,
}

impl ProblemDoc {
    pub fn from_parts(inst: &BilevelInstance, amb: &MomentAmbiguity) -> Self {
        ProblemDoc {
            version: FORMAT_VERSION.to_string(),
            instance: InstanceDoc {
                d: inst.d,
                n: inst.n,
                m: inst.m,
                k: inst.k,
                a: DenseMat::from_matrix(&inst.a),
                b_mats: inst.b_mats.iter().map(DenseMat::from_matrix).collect(),
                b_vecs: inst.b_vecs.iter().map(|v| v.iter().copied().collect()).collect(),
                c_mat: DenseMat::from_matrix(&inst.c_mat),
                c0: inst.c0.iter().copied().collect(),
                v_mat: DenseMat::from_matrix(&inst.v_mat),
                v0: inst.v0.iter().copied().collect(),
                w: inst.w.iter().copied().collect(),
                leader_constraints: inst
                    .leader_set
                    .constraints
                    .iter()
                    .map(|(g, rhs)| LeaderConstraintDoc { g: g.iter().copied().collect(), rhs: *rhs })
                    .collect(),
            },
            ambiguity: AmbiguityDoc {
                mu0: amb.mu0.iter().copied().collect(),
                sigma0: DenseMat::from_matrix(&amb.sigma0),
                gamma1: amb.gamma1,
                gamma2: amb.gamma2,
                domain: match &amb.domain {
                    AmbiguityDomain::Support { w_mat, h } => DomainDoc::Support {
                        w_mat: DenseMat::from_matrix(w_mat),
                        h: h.iter().copied().collect(),
                    },
                    AmbiguityDomain::Scenarios { points } => DomainDoc::Scenarios {
                        points: points.iter().map(|p| p.iter().copied().collect()).collect(),
                    },
                },
            },
        }
    }

    pub fn into_parts(self) -> Result<(BilevelInstance, MomentAmbiguity)> {
        if self.version != FORMAT_VERSION {
            return Err(DrbpError::Invalid(format!(
                "unsupported format version {:?}, expected {FORMAT_VERSION:?}",
                self.version
            )));
        }
        let idoc = self.instance;
        let leader = LeaderSet::new(
            idoc.d,
            idoc.leader_constraints
                .into_iter()
                .map(|c| (DVector::from_vec(c.g), c.rhs))
                .collect(),
        )?;
        let inst = BilevelInstance::new(
            idoc.a.to_matrix()?,
            idoc.b_mats.iter().map(DenseMat::to_matrix).collect::<Result<_>>()?,
            idoc.b_vecs.into_iter().map(DVector::from_vec).collect(),
            idoc.c_mat.to_matrix()?,
            DVector::from_vec(idoc.c0),
            idoc.v_mat.to_matrix()?,
            DVector::from_vec(idoc.v0),
            DVector::from_vec(idoc.w),
            leader,
        )?;
        if inst.n != idoc.n || inst.m != idoc.m || inst.k != idoc.k {
            return Err(DrbpError::Dimension(
                "declared dims disagree with matrix shapes".into(),
            ));
        }
        let adoc = self.ambiguity;
        let domain = match adoc.domain {
            DomainDoc::Support { w_mat, h } => AmbiguityDomain::Support {
                w_mat: w_mat.to_matrix()?,
                h: DVector::from_vec(h),
            },
            DomainDoc::Scenarios { points } => AmbiguityDomain::Scenarios {
                points: points.into_iter().map(DVector::from_vec).collect(),
            },
        };
        let amb = MomentAmbiguity::new(
            DVector::from_vec(adoc.mu0),
            adoc.sigma0.to_matrix()?,
            adoc.gamma1,
            adoc.gamma2,
            domain,
        )?;
        if inst.k != amb.k {
            return Err(DrbpError::Dimension(
                "instance and ambiguity disagree on uncertainty dimension".into(),
            ));
        }
        Ok((inst, amb))
    }
}

pub fn write_problem(inst: &BilevelInstance, amb: &MomentAmbiguity) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ProblemDoc::from_parts(inst, amb))?)
}

pub fn read_problem(json: &str) -> Result<(BilevelInstance, MomentAmbiguity)> {
    let doc: ProblemDoc = serde_json::from_str(json)?;
    doc.into_parts()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::toy_e1;

    #[test]
    fn round_trip_support() {
        let inst = toy_e1();
        let amb = MomentAmbiguity::new(
            DVector::from_vec(vec![3.0]),
            DMatrix::from_element(1, 1, 0.5),
            0.25,
            1.5,
            AmbiguityDomain::Support {
                w_mat: DMatrix::from_row_slice(2, 1, &[1.0, -1.0]),
                h: DVector::from_vec(vec![1.0, -5.0]),
            },
        )
        .unwrap();
        let json = write_problem(&inst, &amb).unwrap();
        assert!(json.contains("drbp-v1"));
        let (inst2, amb2) = read_problem(&json).unwrap();
        assert_eq!(inst, inst2);
        assert_eq!(amb.mu0, amb2.mu0);
        assert_eq!(amb.gamma1, amb2.gamma1);
        assert_eq!(amb.domain, amb2.domain);
    }

    #[test]
    fn round_trip_scenarios() {
        let inst = toy_e1();
        let amb = MomentAmbiguity::new(
            DVector::from_vec(vec![2.0]),
            DMatrix::from_element(1, 1, 1.0),
            0.0,
            1.0,
            AmbiguityDomain::Scenarios {
                points: vec![DVector::from_vec(vec![1.0]), DVector::from_vec(vec![3.0])],
            },
        )
        .unwrap();
        let json = write_problem(&inst, &amb).unwrap();
        let (_, amb2) = read_problem(&json).unwrap();
        assert_eq!(amb2.scenarios().unwrap().len(), 2);
    }

    #[test]
    fn version_gate() {
        let inst = toy_e1();
        let amb = MomentAmbiguity::new(
            DVector::from_vec(vec![3.0]),
            DMatrix::from_element(1, 1, 0.5),
            0.0,
            1.0,
            AmbiguityDomain::Scenarios { points: vec![DVector::from_vec(vec![3.0])] },
        )
        .unwrap();
        let json = write_problem(&inst, &amb).unwrap().replace("drbp-v1", "drbp-v0");
        assert!(read_problem(&json).is_err());
    }
}
