use crate::error::{Error, Result};

/// Sorted set of unique DOF indices.
///
/// Index sets play the role of selection matrices: `extract(K, rows, cols)`
/// is `S_rowsᵀ K S_cols`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct IndexSet {
    idx: Vec<usize>,
}

impl IndexSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a set from a strictly increasing vector.
    pub fn from_sorted(idx: Vec<usize>) -> Result<Self> {
        if idx.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Invalid(
                "index set must be strictly increasing".into(),
            ));
        }
        Ok(Self { idx })
    }

    /// `{0, 1, ..., n-1}`.
    pub fn full(n: usize) -> Self {
        Self { idx: (0..n).collect() }
    }

    pub fn len(&self) -> usize {
        self.idx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.idx.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.idx
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.idx.iter().copied()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.idx.binary_search(&i).is_ok()
    }

    /// Position of `i` inside the set.
    pub fn position(&self, i: usize) -> Option<usize> {
        self.idx.binary_search(&i).ok()
    }

    /// Fails unless every index is below `n`.
    pub fn check_bounds(&self, n: usize) -> Result<()> {
        match self.idx.last() {
            Some(&last) if last >= n => Err(Error::IndexOutOfRange { index: last, dim: n }),
            _ => Ok(()),
        }
    }

    pub fn union(&self, other: &Self) -> Self {
        let (a, b) = (&self.idx, &other.idx);
        let mut out = Vec::with_capacity(a.len() + b.len());
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => {
                    out.push(a[i]);
                    i += 1;
                }
                std::cmp::Ordering::Greater => {
                    out.push(b[j]);
                    j += 1;
                }
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&a[i..]);
        out.extend_from_slice(&b[j..]);
        Self { idx: out }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        let (a, b) = (&self.idx, &other.idx);
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            match a[i].cmp(&b[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    out.push(a[i]);
                    i += 1;
                    j += 1;
                }
            }
        }
        Self { idx: out }
    }

    pub fn difference(&self, other: &Self) -> Self {
        Self {
            idx: self.idx.iter().copied().filter(|&i| !other.contains(i)).collect(),
        }
    }

    /// `{0..n} \ self`.
    pub fn complement(&self, n: usize) -> Self {
        let mut out = Vec::with_capacity(n.saturating_sub(self.len()));
        let mut it = self.idx.iter().peekable();
        for i in 0..n {
            if it.peek() == Some(&&i) {
                it.next();
            } else {
                out.push(i);
            }
        }
        Self { idx: out }
    }

    /// Dense lookup table from global index to position, `usize::MAX` if absent.
    pub fn position_map(&self, n: usize) -> Vec<usize> {
        let mut map = vec![usize::MAX; n];
        for (p, &i) in self.idx.iter().enumerate() {
            map[i] = p;
        }
        map
    }
}

impl FromIterator<usize> for IndexSet {
    fn from_iter<T: IntoIterator<Item = usize>>(iter: T) -> Self {
        let mut idx: Vec<usize> = iter.into_iter().collect();
        idx.sort_unstable();
        idx.dedup();
        Self { idx }
    }
}

impl From<&[usize]> for IndexSet {
    fn from(v: &[usize]) -> Self {
        v.iter().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_algebra() {
        let a: IndexSet = [5, 1, 3, 3].as_slice().into();
        let b: IndexSet = [3, 4].as_slice().into();
        assert_eq!(a.as_slice(), &[1, 3, 5]);
        assert_eq!(a.union(&b).as_slice(), &[1, 3, 4, 5]);
        assert_eq!(a.intersection(&b).as_slice(), &[3]);
        assert_eq!(a.difference(&b).as_slice(), &[1, 5]);
        assert_eq!(a.complement(7).as_slice(), &[0, 2, 4, 6]);
        assert_eq!(a.position(5), Some(2));
        assert_eq!(a.position(4), None);
    }

    #[test]
    fn rejects_unsorted_and_out_of_range() {
        assert!(IndexSet::from_sorted(vec![1, 1]).is_err());
        assert!(IndexSet::from_sorted(vec![2, 1]).is_err());
        let s = IndexSet::from_sorted(vec![0, 4]).unwrap();
        assert!(s.check_bounds(5).is_ok());
        assert_eq!(
            s.check_bounds(4),
            Err(Error::IndexOutOfRange { index: 4, dim: 4 })
        );
    }
}
