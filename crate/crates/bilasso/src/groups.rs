//! Group bookkeeping: the partition of SNP indices into gene groups.

use crate::error::{Error, Result};

/// A partition of the d SNP indices {0..d-1} into K disjoint, non-empty
/// gene groups. Indices are zero-based internally; file formats use
/// one-based indices and convert on load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupStructure {
    num_snps: usize,
    groups: Vec<Vec<usize>>,
    group_of: Vec<usize>,
}

impl GroupStructure {
    /// Build from explicit member lists, validating that the groups are
    /// non-empty, disjoint, and cover {0..d-1} exactly.
    pub fn new(num_snps: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        if num_snps == 0 {
            return Err(Error::InvalidGroups("num_snps must be positive".into()));
        }
        if groups.is_empty() {
            return Err(Error::InvalidGroups("at least one group required".into()));
        }
        let mut group_of = vec![usize::MAX; num_snps];
        for (k, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::InvalidGroups(format!("group {k} is empty")));
            }
            for &i in members {
                if i >= num_snps {
                    return Err(Error::InvalidGroups(format!(
                        "index {i} out of range (d = {num_snps})"
                    )));
                }
                if group_of[i] != usize::MAX {
                    return Err(Error::InvalidGroups(format!(
                        "index {i} assigned to groups {} and {k}",
                        group_of[i]
                    )));
                }
                group_of[i] = k;
            }
        }
        if let Some(i) = group_of.iter().position(|&g| g == usize::MAX) {
            return Err(Error::InvalidGroups(format!(
                "index {i} not covered by any group"
            )));
        }
        Ok(Self {
            num_snps,
            groups,
            group_of,
        })
    }

    /// Build from a per-SNP assignment vector of zero-based group ids.
    /// Group ids must form a contiguous range 0..K.
    pub fn from_assignments(group_of: Vec<usize>) -> Result<Self> {
        if group_of.is_empty() {
            return Err(Error::InvalidGroups("empty assignment vector".into()));
        }
        let k = group_of.iter().max().unwrap() + 1;
        let mut groups = vec![Vec::new(); k];
        for (i, &g) in group_of.iter().enumerate() {
            groups[g].push(i);
        }
        Self::new(group_of.len(), groups)
    }

    /// Contiguous equal-size groups: d must be divisible by k.
    pub fn equal_sizes(num_snps: usize, num_groups: usize) -> Result<Self> {
        if num_groups == 0 || num_snps % num_groups != 0 {
            return Err(Error::InvalidGroups(format!(
                "cannot split {num_snps} SNPs into {num_groups} equal groups"
            )));
        }
        let m = num_snps / num_groups;
        let groups = (0..num_groups)
            .map(|k| (k * m..(k + 1) * m).collect())
            .collect();
        Self::new(num_snps, groups)
    }

    pub fn num_snps(&self) -> usize {
        self.num_snps
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    /// m_k, the size of group k.
    pub fn size(&self, k: usize) -> usize {
        self.groups[k].len()
    }

    /// Member indices of group k.
    pub fn members(&self, k: usize) -> &[usize] {
        &self.groups[k]
    }

    /// Group id k(i) of SNP i.
    pub fn group_of(&self, i: usize) -> usize {
        self.group_of[i]
    }

    pub fn assignments(&self) -> &[usize] {
        &self.group_of
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn valid_partition() {
        let g = GroupStructure::new(4, vec![vec![0, 2], vec![1, 3]]).unwrap();
        assert_eq!(g.num_groups(), 2);
        assert_eq!(g.size(0), 2);
        assert_eq!(g.group_of(3), 1);
        assert_eq!(g.size(0) + g.size(1), g.num_snps());
    }

    #[test]
    fn rejects_empty_group() {
        assert!(GroupStructure::new(2, vec![vec![0, 1], vec![]]).is_err());
    }

    #[test]
    fn rejects_overlap_and_gap() {
        assert!(GroupStructure::new(3, vec![vec![0, 1], vec![1, 2]]).is_err());
        assert!(GroupStructure::new(3, vec![vec![0], vec![2]]).is_err());
        assert!(GroupStructure::new(3, vec![vec![0, 1, 2, 3]]).is_err());
    }

    #[test]
    fn equal_sizes_splits_contiguously() {
        let g = GroupStructure::equal_sizes(6, 3).unwrap();
        assert_eq!(g.members(1), &[2, 3]);
        assert!(GroupStructure::equal_sizes(7, 3).is_err());
    }

    #[test]
    fn from_assignments_round_trip() {
        let g = GroupStructure::from_assignments(vec![0, 0, 1, 1, 2]).unwrap();
        assert_eq!(g.num_groups(), 3);
        assert_eq!(g.members(2), &[4]);
    }
}
