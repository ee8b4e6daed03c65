//! Greedy relative Lempel-Ziv parsing of documents against a dictionary, and
//! reconstruction of documents from their factors.

use bitvec::prelude::*;

use crate::dictionary::Dictionary;
use crate::error::{Result, RlzError};
use crate::suffix_index::{SearchTrace, SuffixArray};

/// A `(position, length)` pair. A length of 0 marks a literal whose byte
/// value is carried in `position`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Factor {
    pub position: u32,
    pub length: u32,
}

impl Factor {
    pub fn copy(position: u32, length: u32) -> Self {
        Factor { position, length }
    }

    pub fn literal(byte: u8) -> Self {
        Factor {
            position: byte as u32,
            length: 0,
        }
    }

    pub fn is_literal(&self) -> bool {
        self.length == 0
    }

    /// Bytes of source text this factor stands for.
    pub fn span(&self) -> u64 {
        self.length.max(1) as u64
    }
}

/// The factorization of one document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FactorDocument {
    pub factors: Vec<Factor>,
    pub original_len: u64,
}

impl FactorDocument {
    /// Total source bytes covered by the factors.
    pub fn covered_len(&self) -> u64 {
        self.factors.iter().map(Factor::span).sum()
    }
}

/// A dictionary together with its suffix array.
#[derive(Debug, Clone)]
pub struct IndexedDictionary {
    dict: Dictionary,
    sa: SuffixArray,
}

impl IndexedDictionary {
    pub fn new(dict: Dictionary) -> Self {
        let sa = SuffixArray::build(dict.bytes());
        IndexedDictionary { dict, sa }
    }

    pub fn dictionary(&self) -> &Dictionary {
        &self.dict
    }

    pub fn suffix_array(&self) -> &SuffixArray {
        &self.sa
    }

    pub fn into_dictionary(self) -> Dictionary {
        self.dict
    }

    /// Factorizes `doc` left to right, taking the longest dictionary match at
    /// each position, or a literal when the next byte is absent from the
    /// dictionary.
    pub fn factorize(&self, doc: &[u8]) -> FactorDocument {
        let mut trace = SearchTrace::default();
        self.factorize_traced(doc, &mut trace)
    }

    pub fn factorize_traced(&self, doc: &[u8], trace: &mut SearchTrace) -> FactorDocument {
        let text = self.dict.bytes();
        let mut factors = Vec::new();
        let mut i = 0usize;
        while i < doc.len() {
            let (pos, len) = self.sa.longest_match_traced(text, &doc[i..], trace);
            if len == 0 {
                factors.push(Factor::literal(doc[i]));
                i += 1;
            } else {
                factors.push(Factor::copy(pos as u32, len as u32));
                i += len;
            }
        }
        FactorDocument {
            factors,
            original_len: doc.len() as u64,
        }
    }

    pub fn materialize(&self, fdoc: &FactorDocument) -> Result<Vec<u8>> {
        materialize(&self.dict, fdoc)
    }
}

/// Convenience wrapper: `index.factorize(doc)`.
pub fn factorize_document(index: &IndexedDictionary, doc: &[u8]) -> FactorDocument {
    index.factorize(doc)
}

/// Expands factors back into document bytes.
pub fn materialize(dict: &Dictionary, fdoc: &FactorDocument) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(fdoc.original_len as usize);
    materialize_into(dict.bytes(), &fdoc.factors, &mut out)?;
    Ok(out)
}

/// Appends the expansion of `factors` to `out`.
pub fn materialize_into(dict: &[u8], factors: &[Factor], out: &mut Vec<u8>) -> Result<()> {
    for f in factors {
        if f.is_literal() {
            let byte = u8::try_from(f.position).map_err(|_| corrupt(f, dict.len()))?;
            out.push(byte);
        } else {
            let start = f.position as usize;
            let end = start + f.length as usize;
            let run = dict.get(start..end).ok_or_else(|| corrupt(f, dict.len()))?;
            out.extend_from_slice(run);
        }
    }
    Ok(())
}

fn corrupt(f: &Factor, dict_len: usize) -> RlzError {
    RlzError::CorruptFactor {
        position: f.position,
        length: f.length,
        dict_len,
    }
}

/// Which dictionary offsets are referenced by at least one copy factor.
#[derive(Debug, Clone)]
pub struct Coverage {
    bits: BitVec,
}

impl Coverage {
    pub fn new(dict_len: usize) -> Self {
        Coverage {
            bits: bitvec![0; dict_len],
        }
    }

    pub fn add(&mut self, factors: &[Factor]) {
        let len = self.bits.len();
        for f in factors.iter().filter(|f| !f.is_literal()) {
            let start = (f.position as usize).min(len);
            let end = (f.position as usize + f.length as usize).min(len);
            self.bits[start..end].fill(true);
        }
    }

    pub fn merge(&mut self, other: &Coverage) {
        self.bits |= &other.bits;
    }

    pub fn is_covered(&self, offset: usize) -> bool {
        self.bits[offset]
    }

    pub fn dict_len(&self) -> usize {
        self.bits.len()
    }

    pub fn unused_bytes(&self) -> usize {
        self.bits.count_zeros()
    }

    /// Percentage of dictionary bytes never referenced; `None` for an empty
    /// dictionary.
    pub fn unused_pct(&self) -> Option<f64> {
        (!self.bits.is_empty())
            .then(|| 100.0 * self.unused_bytes() as f64 / self.bits.len() as f64)
    }
}

/// Coverage bitmap accumulated over a stream of factorized documents.
pub fn coverage<'a, I>(fdocs: I, dict_len: usize) -> Coverage
where
    I: IntoIterator<Item = &'a FactorDocument>,
{
    let mut cov = Coverage::new(dict_len);
    for fdoc in fdocs {
        cov.add(&fdoc.factors);
    }
    cov
}
