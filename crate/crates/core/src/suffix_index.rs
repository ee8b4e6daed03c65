//! Suffix array over the dictionary and the interval-refinement search used
//! to find longest matches.
//!
//! All offsets and ranks are 0-based. Suffixes are ordered by unsigned byte
//! comparison, with a suffix that is a proper prefix of another sorting first.

/// Lexicographically sorted suffix start offsets of a text.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SuffixArray {
    entries: Vec<u32>,
}

/// A contiguous rank range `[lb, rb]` of suffixes sharing their first
/// `depth` bytes. An absent interval is represented by `None`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SearchInterval {
    pub lb: usize,
    pub rb: usize,
    pub depth: usize,
}

impl SearchInterval {
    /// The interval covering every suffix at depth 0, or `None` for an empty text.
    pub fn full(text_len: usize) -> Option<Self> {
        (text_len > 0).then(|| SearchInterval {
            lb: 0,
            rb: text_len - 1,
            depth: 0,
        })
    }

    pub fn width(&self) -> usize {
        self.rb - self.lb + 1
    }
}

/// Work counters for a search, used to check the logarithmic probe bound.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchTrace {
    /// Number of `refine` calls issued.
    pub refine_calls: u64,
    /// Number of suffix bytes inspected inside `refine`.
    pub probes: u64,
}

impl SuffixArray {
    /// Builds the suffix array by prefix doubling with radix-sorted rounds,
    /// O(n log n) overall.
    ///
    /// Texts are limited to `u32::MAX` bytes since entries are stored as `u32`.
    pub fn build(text: &[u8]) -> Self {
        let n = text.len();
        assert!(
            n <= u32::MAX as usize,
            "suffix array text exceeds u32 addressing"
        );
        if n == 0 {
            return SuffixArray::default();
        }

        let mut rank: Vec<u32> = text.iter().map(|&b| b as u32).collect();
        let mut sa: Vec<u32> = (0..n as u32).collect();
        let mut classes = 256usize;
        counting_sort_by_rank(&(0..n as u32).collect::<Vec<_>>(), &rank, classes, &mut sa);

        let mut next_rank = vec![0u32; n];
        let mut second_order: Vec<u32> = Vec::with_capacity(n);
        let mut k = 1usize;
        loop {
            // Suffixes whose second half runs off the end sort first on the
            // second key; the rest follow in current first-key order.
            second_order.clear();
            second_order.extend((n.saturating_sub(k)..n).map(|i| i as u32));
            second_order.extend(
                sa.iter()
                    .filter(|&&s| s as usize >= k)
                    .map(|&s| s - k as u32),
            );
            counting_sort_by_rank(&second_order, &rank, classes, &mut sa);

            let key = |i: usize| {
                let second = if i + k < n { rank[i + k] as i64 } else { -1 };
                (rank[i], second)
            };
            next_rank[sa[0] as usize] = 0;
            let mut class = 0u32;
            for w in 1..n {
                if key(sa[w - 1] as usize) != key(sa[w] as usize) {
                    class += 1;
                }
                next_rank[sa[w] as usize] = class;
            }
            std::mem::swap(&mut rank, &mut next_rank);
            classes = class as usize + 1;
            if classes == n {
                break;
            }
            k *= 2;
        }
        SuffixArray { entries: sa }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    /// Start offset of the suffix at sorted rank `rank`.
    #[inline]
    pub fn suffix_at(&self, rank: usize) -> usize {
        self.entries[rank] as usize
    }

    /// Narrows `iv` to the suffixes whose byte at offset `iv.depth` equals
    /// `next_byte`. Returns `None` when no suffix in the interval continues
    /// with that byte.
    pub fn refine(
        &self,
        text: &[u8],
        iv: SearchInterval,
        next_byte: u8,
    ) -> Option<SearchInterval> {
        let mut trace = SearchTrace::default();
        self.refine_traced(text, iv, next_byte, &mut trace)
    }

    /// [`refine`](Self::refine) with probe accounting.
    pub fn refine_traced(
        &self,
        text: &[u8],
        iv: SearchInterval,
        next_byte: u8,
        trace: &mut SearchTrace,
    ) -> Option<SearchInterval> {
        debug_assert!(iv.lb <= iv.rb && iv.rb < self.entries.len());
        trace.refine_calls += 1;
        let depth = iv.depth;
        let target = next_byte as i16;
        // Within a valid interval the byte at `depth` is non-decreasing in
        // rank, with exhausted suffixes (-1) first.
        let mut key = |rank: usize| -> i16 {
            trace.probes += 1;
            text.get(self.entries[rank] as usize + depth)
                .map_or(-1, |&b| b as i16)
        };

        let (mut lo, mut hi) = (iv.lb, iv.rb + 1);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if key(mid) < target {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        let start = lo;
        let mut hi = iv.rb + 1;
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if key(mid) <= target {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        let end = lo;

        (start < end).then(|| SearchInterval {
            lb: start,
            rb: end - 1,
            depth: depth + 1,
        })
    }

    /// Longest prefix of `query` occurring in `text`, as `(position, length)`.
    /// A zero length means the query is empty or its first byte is absent, and
    /// the position is then meaningless (reported as 0).
    pub fn longest_match(&self, text: &[u8], query: &[u8]) -> (usize, usize) {
        let mut trace = SearchTrace::default();
        self.longest_match_traced(text, query, &mut trace)
    }

    /// [`longest_match`](Self::longest_match) with work accounting.
    ///
    /// Refines one byte at a time until the interval holds a single suffix,
    /// then extends that suffix by direct comparison.
    pub fn longest_match_traced(
        &self,
        text: &[u8],
        query: &[u8],
        trace: &mut SearchTrace,
    ) -> (usize, usize) {
        let Some(mut iv) = SearchInterval::full(text.len()) else {
            return (0, 0);
        };
        let mut matched = 0usize;
        while matched < query.len() {
            if iv.lb == iv.rb {
                let start = self.suffix_at(iv.lb);
                let tail = &text[start + matched..];
                let extra = tail
                    .iter()
                    .zip(&query[matched..])
                    .take_while(|(a, b)| a == b)
                    .count();
                matched += extra;
                break;
            }
            match self.refine_traced(text, iv, query[matched], trace) {
                Some(next) => {
                    iv = next;
                    matched += 1;
                }
                None => break,
            }
        }
        if matched == 0 {
            (0, 0)
        } else {
            (self.suffix_at(iv.lb), matched)
        }
    }
}

/// Stable counting sort of `order` by `rank`, written into `out`.
fn counting_sort_by_rank(order: &[u32], rank: &[u32], classes: usize, out: &mut [u32]) {
    let mut counts = vec![0usize; classes + 1];
    for &i in order {
        counts[rank[i as usize] as usize + 1] += 1;
    }
    for c in 1..counts.len() {
        counts[c] += counts[c - 1];
    }
    for &i in order {
        let slot = &mut counts[rank[i as usize] as usize];
        out[*slot] = i;
        *slot += 1;
    }
}
