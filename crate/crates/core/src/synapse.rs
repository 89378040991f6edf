//! Synapse location records and their CSV form.
//!
//! CSV header: `synapse_id,x_nm,y_nm,z_nm,cell_id`.

use std::path::Path;

use nalgebra::Point3;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Synapse {
    pub id: u64,
    pub position: Point3<f64>,
    pub cell_id: String,
}

#[derive(Debug, Clone, Default)]
pub struct SynapseSet {
    synapses: Vec<Synapse>,
}

impl SynapseSet {
    pub fn new(synapses: Vec<Synapse>) -> Result<Self> {
        let mut ids: Vec<u64> = synapses.iter().map(|s| s.id).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("duplicate synapse ids".into()));
        }
        for s in &synapses {
            if !s.position.coords.iter().all(|c| c.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "synapse {} has non-finite position",
                    s.id
                )));
            }
        }
        Ok(SynapseSet { synapses })
    }

    pub fn iter(&self) -> impl Iterator<Item = &Synapse> {
        self.synapses.iter()
    }

    pub fn len(&self) -> usize {
        self.synapses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.synapses.is_empty()
    }

    pub fn as_slice(&self) -> &[Synapse] {
        &self.synapses
    }

    /// Synapses targeting one cell, preserving file order.
    pub fn for_cell(&self, cell_id: &str) -> SynapseSet {
        SynapseSet {
            synapses: self
                .synapses
                .iter()
                .filter(|s| s.cell_id == cell_id)
                .cloned()
                .collect(),
        }
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        {
            let headers = reader.headers()?;
            let expect = ["synapse_id", "x_nm", "y_nm", "z_nm", "cell_id"];
            if headers.len() != expect.len()
                || headers.iter().zip(expect.iter()).any(|(a, b)| a != *b)
            {
                return Err(Error::InvalidInput(format!(
                    "bad synapse csv header {:?}, expected {:?}",
                    headers, expect
                )));
            }
        }
        let mut synapses = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let id: u64 = rec[0]
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad synapse_id '{}'", &rec[0])))?;
            let x: f64 = rec[1]
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad x_nm '{}'", &rec[1])))?;
            let y: f64 = rec[2]
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad y_nm '{}'", &rec[2])))?;
            let z: f64 = rec[3]
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad z_nm '{}'", &rec[3])))?;
            synapses.push(Synapse {
                id,
                position: Point3::new(x, y, z),
                cell_id: rec[4].to_string(),
            });
        }
        SynapseSet::new(synapses)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["synapse_id", "x_nm", "y_nm", "z_nm", "cell_id"])?;
        for s in &self.synapses {
            w.write_record(&[
                s.id.to_string(),
                s.position.x.to_string(),
                s.position.y.to_string(),
                s.position.z.to_string(),
                s.cell_id.clone(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_ids_rejected() {
        let mk = |id| Synapse {
            id,
            position: Point3::origin(),
            cell_id: "c".into(),
        };
        assert!(SynapseSet::new(vec![mk(1), mk(1)]).is_err());
        assert!(SynapseSet::new(vec![mk(1), mk(2)]).is_ok());
    }

    #[test]
    fn csv_roundtrip() {
        let set = SynapseSet::new(vec![
            Synapse {
                id: 10,
                position: Point3::new(1.5, -2.0, 3e5),
                cell_id: "cell_000".into(),
            },
            Synapse {
                id: 11,
                position: Point3::new(0.0, 0.25, -1.0),
                cell_id: "cell_001".into(),
            },
        ])
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("syn.csv");
        set.write_csv(&p).unwrap();
        let back = SynapseSet::read_csv(&p).unwrap();
        assert_eq!(back.as_slice(), set.as_slice());
        assert_eq!(back.for_cell("cell_000").len(), 1);
    }
}
