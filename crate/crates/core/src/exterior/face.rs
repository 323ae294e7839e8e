use serde::{Deserialize, Serialize};
use std::fmt;

/// Ordered subset of the slots `{0, .., m-1}`; the slots that lie in the body.
///
/// Slots outside the face sit at `theta = 0`. The empty face is the vertex.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FaceIndex {
    pub m: usize,
    pub mask: u32,
}

impl FaceIndex {
    pub fn new(m: usize, slots: &[usize]) -> Self {
        let mut mask = 0;
        for &s in slots {
            assert!(s < m, "slot {s} out of range for order {m}");
            mask |= 1 << s;
        }
        FaceIndex { m, mask }
    }

    pub fn top(m: usize) -> Self {
        FaceIndex {
            m,
            mask: (1u32 << m) - 1,
        }
    }

    pub fn vertex(m: usize) -> Self {
        FaceIndex { m, mask: 0 }
    }

    pub fn size(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn contains(&self, slot: usize) -> bool {
        self.mask & (1 << slot) != 0
    }

    pub fn slots(&self) -> Vec<usize> {
        (0..self.m).filter(|&j| self.contains(j)).collect()
    }

    pub fn complement(&self) -> Vec<usize> {
        (0..self.m).filter(|&j| !self.contains(j)).collect()
    }

    pub fn with(&self, slot: usize) -> Self {
        FaceIndex {
            m: self.m,
            mask: self.mask | (1 << slot),
        }
    }

    /// All `2^m` faces, ordered by size and then lexicographically.
    pub fn all(m: usize) -> Vec<FaceIndex> {
        let mut v: Vec<FaceIndex> = (0..(1u32 << m)).map(|mask| FaceIndex { m, mask }).collect();
        v.sort_by_key(|f| (f.size(), f.slots()));
        v
    }
}

impl fmt::Display for FaceIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.slots().iter().map(|j| (j + 1).to_string()).collect();
        write!(f, "{{{}}}", s.join(","))
    }
}
