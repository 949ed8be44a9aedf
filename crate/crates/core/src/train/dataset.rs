use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::qcore::{config_index, Basis};

/// All records measured in one basis; outcomes are configuration indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisGroup {
    pub basis: Basis,
    pub outcomes: Vec<usize>,
}

/// A single measurement: index of its basis group and the outcome index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Record {
    pub group: usize,
    pub outcome: usize,
}

/// Basis-labelled outcomes grouped per basis, in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    n_qubits: usize,
    groups: Vec<BasisGroup>,
}

impl Dataset {
    pub fn new(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            groups: Vec::new(),
        }
    }

    pub fn from_groups(n_qubits: usize, groups: Vec<BasisGroup>) -> Result<Self> {
        let mut ds = Self::new(n_qubits);
        for g in groups {
            if g.outcomes.is_empty() {
                return Err(Error::InvalidArgument(alloc::format!(
                    "basis {} has no records",
                    g.basis
                )));
            }
            for o in g.outcomes {
                ds.push(g.basis.clone(), o)?;
            }
        }
        Ok(ds)
    }

    pub fn push(&mut self, basis: Basis, outcome: usize) -> Result<()> {
        if basis.len() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.n_qubits,
                got: basis.len(),
            });
        }
        if self.n_qubits < usize::BITS as usize && outcome >> self.n_qubits != 0 {
            return Err(Error::InvalidArgument(alloc::format!(
                "outcome {outcome} out of range for {} qubits",
                self.n_qubits
            )));
        }
        match self.groups.iter_mut().find(|g| g.basis == basis) {
            Some(g) => g.outcomes.push(outcome),
            None => self.groups.push(BasisGroup {
                basis,
                outcomes: alloc::vec![outcome],
            }),
        }
        Ok(())
    }

    pub fn push_bits(&mut self, basis: Basis, bits: &[u8]) -> Result<()> {
        if bits.len() != self.n_qubits || bits.iter().any(|&b| b > 1) {
            return Err(Error::InvalidArgument(
                "outcome bitstring does not match the qubit count".into(),
            ));
        }
        self.push(basis, config_index(bits))
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn groups(&self) -> &[BasisGroup] {
        &self.groups
    }

    pub fn n_records(&self) -> usize {
        self.groups.iter().map(|g| g.outcomes.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    /// Every record, group by group.
    pub fn records(&self) -> Vec<Record> {
        self.groups
            .iter()
            .enumerate()
            .flat_map(|(gi, g)| g.outcomes.iter().map(move |&o| Record { group: gi, outcome: o }))
            .collect()
    }

    /// Per group, the distinct outcomes with their multiplicities (ascending).
    pub fn counts(&self) -> Vec<Vec<(usize, usize)>> {
        self.groups
            .iter()
            .map(|g| {
                let mut m = BTreeMap::new();
                for &o in &g.outcomes {
                    *m.entry(o).or_insert(0usize) += 1;
                }
                m.into_iter().collect()
            })
            .collect()
    }

    /// Subset made of the given records; groups that end up empty are dropped.
    pub fn subset(&self, records: &[Record]) -> Self {
        let mut ds = Self::new(self.n_qubits);
        for r in records {
            // indices come from this dataset, so the push cannot fail
            let _ = ds.push(self.groups[r.group].basis.clone(), r.outcome);
        }
        ds
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.groups.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(())
    }
}
