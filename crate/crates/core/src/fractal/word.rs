use std::fmt;
use std::str::FromStr;

use crate::{Error, Result};

/// A multi-index `(i_1, ..., i_M)` addressing the cell `phi_{i_M} o ... o phi_{i_1}(A)`.
///
/// Indices are stored zero-based; `Display` and `FromStr` use the one-based,
/// dot-separated form (`"1.2.2"`), with the empty word written as `""`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(Vec<u16>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// Builds a word from zero-based indices.
    pub fn from_indices(indices: Vec<u16>) -> Self {
        Word(indices)
    }

    /// Builds a word from one-based indices, checking each is in `1..=n`.
    pub fn from_one_based(indices: &[usize], n: usize) -> Result<Self> {
        indices
            .iter()
            .map(|&i| {
                if i >= 1 && i <= n {
                    Ok((i - 1) as u16)
                } else {
                    Err(Error::invalid(format!("word index {i} outside 1..={n}")))
                }
            })
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }

    /// Decodes the lexicographic position `idx` among words of length `len` over `n` letters.
    pub fn from_index(mut idx: usize, n: usize, len: usize) -> Self {
        let mut v = vec![0u16; len];
        for slot in v.iter_mut().rev() {
            *slot = (idx % n) as u16;
            idx /= n;
        }
        Word(v)
    }

    pub fn indices(&self) -> &[u16] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Lexicographic position with `i_1` most significant.
    pub fn index(&self, n: usize) -> usize {
        self.0.iter().fold(0, |acc, &i| acc * n + i as usize)
    }

    /// The last `m` indices: the word of the level-`m` cell containing this one.
    pub fn ancestor(&self, m: usize) -> Word {
        let m = m.min(self.len());
        Word(self.0[self.len() - m..].to_vec())
    }

    /// `(i, i_1, ..., i_M)`: the child cell obtained by applying `phi_i` innermost.
    pub fn child(&self, i: u16) -> Word {
        let mut v = Vec::with_capacity(self.len() + 1);
        v.push(i);
        v.extend_from_slice(&self.0);
        Word(v)
    }

    /// Pads on the inner side with copies of letter `i` up to length `len`.
    pub fn padded_inner(&self, i: u16, len: usize) -> Word {
        if self.len() >= len {
            return self.clone();
        }
        let mut v = vec![i; len - self.len()];
        v.extend_from_slice(&self.0);
        Word(v)
    }

    /// Product of the member scales.
    pub fn scale(&self, scales: &[f64]) -> f64 {
        self.0.iter().map(|&i| scales[i as usize]).product()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, i) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str(".")?;
            }
            write!(f, "{}", i + 1)?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Word::empty());
        }
        s.split('.')
            .map(|t| match t.trim().parse::<u16>() {
                Ok(i) if i >= 1 => Ok(i - 1),
                _ => Err(Error::invalid(format!("bad word token {t:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Word)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn display_is_one_based() {
        let w = Word::from_one_based(&[1, 2], 2).unwrap();
        assert_eq!(w.to_string(), "1.2");
        assert_eq!("1.2".parse::<Word>().unwrap(), w);
        assert_eq!("".parse::<Word>().unwrap(), Word::empty());
        assert!("0.1".parse::<Word>().is_err());
        assert!(Word::from_one_based(&[3], 2).is_err());
    }

    #[test]
    fn ancestor_is_suffix() {
        let w = Word::from_one_based(&[1, 2, 3], 3).unwrap();
        assert_eq!(w.ancestor(1).to_string(), "3");
        assert_eq!(w.ancestor(2).to_string(), "2.3");
        assert_eq!(w.ancestor(5), w);
        assert_eq!(w.child(1).to_string(), "2.1.2.3");
    }

    proptest! {
        #[test]
        fn index_round_trip(n in 2usize..5, len in 0usize..7, seed in 0usize..10_000) {
            let total = n.pow(len as u32);
            let idx = seed % total;
            let w = Word::from_index(idx, n, len);
            prop_assert_eq!(w.len(), len);
            prop_assert_eq!(w.index(n), idx);
            // the level-m ancestor sits at idx mod n^m
            for m in 0..=len {
                prop_assert_eq!(w.ancestor(m).index(n), idx % n.pow(m as u32));
            }
        }
    }
}
