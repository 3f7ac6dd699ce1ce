//! Words over the letter alphabet `{1..N}` indexing cells of the carpet.

use serde::{Deserialize, Serialize};
use std::fmt;

/// A finite word; the empty word addresses the whole square.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Word(pub Vec<u16>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn single(letter: u16) -> Self {
        Word(vec![letter])
    }

    pub fn level(&self) -> u32 {
        self.0.len() as u32
    }

    pub fn letters(&self) -> &[u16] {
        &self.0
    }

    /// Concatenation `self . tail`.
    pub fn concat(&self, tail: &Word) -> Word {
        let mut v = self.0.clone();
        v.extend_from_slice(&tail.0);
        Word(v)
    }

    pub fn push(&self, letter: u16) -> Word {
        let mut v = self.0.clone();
        v.push(letter);
        Word(v)
    }

    pub fn prefix(&self, len: usize) -> Word {
        Word(self.0[..len].to_vec())
    }

    pub fn suffix(&self, from: usize) -> Word {
        Word(self.0[from..].to_vec())
    }

    /// Lexicographic rank among all words of the same level (row-major).
    pub fn index(&self, n_letters: u32) -> usize {
        let mut idx = 0usize;
        for &l in &self.0 {
            debug_assert!(l >= 1 && (l as u32) <= n_letters);
            idx = idx * n_letters as usize + (l as usize - 1);
        }
        idx
    }

    /// Inverse of [`Word::index`].
    pub fn from_index(mut idx: usize, level: u32, n_letters: u32) -> Word {
        let mut v = vec![0u16; level as usize];
        for slot in v.iter_mut().rev() {
            *slot = (idx % n_letters as usize) as u16 + 1;
            idx /= n_letters as usize;
        }
        debug_assert_eq!(idx, 0);
        Word(v)
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "()");
        }
        let parts: Vec<String> = self.0.iter().map(|l| l.to_string()).collect();
        write!(f, "{}", parts.join("."))
    }
}

/// Number of words at a level, guarded against address-space overflow.
pub fn level_size(n_letters: u32, level: u32) -> Option<usize> {
    let mut size = 1usize;
    for _ in 0..level {
        size = size.checked_mul(n_letters as usize)?;
    }
    Some(size)
}
