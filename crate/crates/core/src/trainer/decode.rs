use serde::Serialize;

use crate::fst::Label;
use crate::loss::EmissionMatrix;
use crate::topology::{label_of_column, Transcript, BLANK};

/// Per-frame argmax over blank and units (lowest column on ties), repeats
/// merged, blanks dropped. ★, the last emission column, takes no part: the
/// decoding topology is the plain CTC one, so ★ never surfaces and never
/// displaces a unit.
pub fn greedy_decode(e: &EmissionMatrix) -> Transcript {
    let units = e.width().saturating_sub(1);
    let mut out = Vec::new();
    let mut prev = None;
    for t in 0..e.frames() {
        let row = &e.row(t)[..units];
        let mut best = 0;
        for (c, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = c;
            }
        }
        let label = label_of_column(best);
        if Some(label) != prev && label != BLANK {
            out.push(label);
        }
        prev = Some(label);
    }
    Transcript::from_labels_unchecked(out)
}

/// Edit counts of one alignment between a reference and a hypothesis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct EditCounts {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub ref_len: usize,
}

impl EditCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }

    /// `100 · errors / ref_len`; infinite for an empty reference with errors.
    pub fn error_rate(&self) -> f64 {
        if self.ref_len == 0 {
            return if self.errors() == 0 { 0.0 } else { f64::INFINITY };
        }
        100.0 * self.errors() as f64 / self.ref_len as f64
    }
}

impl std::ops::AddAssign for EditCounts {
    fn add_assign(&mut self, o: EditCounts) {
        self.substitutions += o.substitutions;
        self.insertions += o.insertions;
        self.deletions += o.deletions;
        self.ref_len += o.ref_len;
    }
}

/// Unit-cost Levenshtein alignment. On the backtrace a diagonal step is taken
/// whenever it is optimal, then a deletion, then an insertion.
pub fn edit_distance(reference: &[Label], hypothesis: &[Label]) -> EditCounts {
    let (n, m) = (reference.len(), hypothesis.len());
    let mut d = vec![vec![0usize; m + 1]; n + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[i - 1][j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    let mut counts = EditCounts {
        ref_len: n,
        ..Default::default()
    };
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        if i > 0 && j > 0 {
            let differ = reference[i - 1] != hypothesis[j - 1];
            if d[i][j] == d[i - 1][j - 1] + usize::from(differ) {
                counts.substitutions += usize::from(differ);
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if i > 0 && d[i][j] == d[i - 1][j] + 1 {
            counts.deletions += 1;
            i -= 1;
        } else {
            counts.insertions += 1;
            j -= 1;
        }
    }
    counts
}
