//! Subset templates such as `solar:n,wind:n,hydro:1@1..3`: for each `n` in
//! the range, every choice of `n` solar, `n` wind and one hydro asset.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{CfeError, Result};
use crate::scenario::{AssetKind, ScenarioSet};

/// Upper limit on the subsets one sweep may enumerate.
pub const MAX_SUBSETS: usize = 2000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TermCount {
    /// The sweep variable.
    N,
    Fixed(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateTerm {
    pub kind: AssetKind,
    pub count: TermCount,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubsetTemplate {
    pub terms: Vec<TemplateTerm>,
    /// Inclusive sweep range for `n`.
    pub range: (usize, usize),
}

impl FromStr for SubsetTemplate {
    type Err = CfeError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| CfeError::invalid(format!("subset template `{s}`: {why}"));
        let (body, range) = match s.split_once('@') {
            Some((body, range)) => (body, Some(range)),
            None => (s, None),
        };
        let mut terms: Vec<TemplateTerm> = Vec::new();
        for part in body.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (kind, count) = part.split_once(':').ok_or_else(|| bad("terms look like `kind:count`"))?;
            let kind = AssetKind::from_str(kind.trim())?;
            let count = match count.trim() {
                "n" => TermCount::N,
                c => TermCount::Fixed(c.parse().map_err(|_| bad("counts are `n` or an integer"))?),
            };
            if terms.iter().any(|t| t.kind == kind) {
                return Err(bad("each kind may appear once"));
            }
            terms.push(TemplateTerm { kind, count });
        }
        if terms.is_empty() {
            return Err(bad("no terms"));
        }
        let uses_n = terms.iter().any(|t| t.count == TermCount::N);
        let range = match range {
            Some(r) => {
                let (lo, hi) = r.split_once("..").ok_or_else(|| bad("range looks like `lo..hi`"))?;
                let lo: usize = lo.trim().parse().map_err(|_| bad("range bounds are integers"))?;
                let hi: usize = hi.trim().parse().map_err(|_| bad("range bounds are integers"))?;
                if lo > hi {
                    return Err(bad("empty range"));
                }
                (lo, hi)
            }
            None if uses_n => return Err(bad("`n` needs a range such as `@1..3`")),
            None => (0, 0),
        };
        Ok(SubsetTemplate { terms, range })
    }
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    (0..k.min(n - k)).fold(1usize, |acc, j| acc.saturating_mul(n - j) / (j + 1))
}

fn combinations(pool: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn walk(pool: &[usize], k: usize, start: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for j in start..pool.len() {
            current.push(pool[j]);
            walk(pool, k, j + 1, current, out);
            current.pop();
        }
    }
    walk(pool, k, 0, &mut current, &mut out);
    out
}

impl SubsetTemplate {
    fn count_for(&self, term: &TemplateTerm, n: usize) -> usize {
        match term.count {
            TermCount::N => n,
            TermCount::Fixed(c) => c,
        }
    }

    /// `(n, asset indices)` pairs; indices ascending, subsets in a fixed order.
    pub fn enumerate(&self, set: &ScenarioSet) -> Result<Vec<(usize, Vec<usize>)>> {
        let pools: Vec<Vec<usize>> = self
            .terms
            .iter()
            .map(|t| {
                set.assets()
                    .iter()
                    .enumerate()
                    .filter(|(_, a)| a.kind == t.kind)
                    .map(|(i, _)| i)
                    .collect()
            })
            .collect();
        let mut total = 0usize;
        for n in self.range.0..=self.range.1 {
            let mut per_n = 1usize;
            for (term, pool) in self.terms.iter().zip(&pools) {
                let k = self.count_for(term, n);
                if k > pool.len() {
                    return Err(CfeError::invalid(format!(
                        "template asks for {k} {} assets but the universe has {}",
                        term.kind.as_str(),
                        pool.len()
                    )));
                }
                per_n = per_n.saturating_mul(binomial(pool.len(), k));
            }
            total = total.saturating_add(per_n);
        }
        if total > MAX_SUBSETS {
            return Err(CfeError::invalid(format!(
                "template expands to {total} subsets, above the limit of {MAX_SUBSETS}; narrow the range or fix more counts"
            )));
        }

        let mut out = Vec::with_capacity(total);
        for n in self.range.0..=self.range.1 {
            let mut partial: Vec<Vec<usize>> = vec![Vec::new()];
            for (term, pool) in self.terms.iter().zip(&pools) {
                let choices = combinations(pool, self.count_for(term, n));
                partial = partial
                    .iter()
                    .flat_map(|p| {
                        choices.iter().map(move |c| {
                            let mut merged = p.clone();
                            merged.extend_from_slice(c);
                            merged
                        })
                    })
                    .collect();
            }
            for mut subset in partial {
                if subset.is_empty() {
                    continue;
                }
                subset.sort_unstable();
                out.push((n, subset));
            }
        }
        Ok(out)
    }
}
