//! Exact rank of small integer matrices.

use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};

type SparseRow = Vec<(usize, i128)>;

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

fn normalize(row: &mut SparseRow) {
    let g = row.iter().fold(0, |g, &(_, v)| gcd(g, v));
    if g > 1 {
        for e in row.iter_mut() {
            e.1 /= g;
        }
    }
}

/// `a * row - b * pivot`, both rows sorted by column.
fn combine(row: &SparseRow, a: i128, pivot: &SparseRow, b: i128) -> Result<SparseRow> {
    let mut out = Vec::with_capacity(row.len() + pivot.len());
    let (mut i, mut j) = (0, 0);
    while i < row.len() || j < pivot.len() {
        let ci = row.get(i).map_or(usize::MAX, |e| e.0);
        let cj = pivot.get(j).map_or(usize::MAX, |e| e.0);
        let (c, v) = if ci < cj {
            i += 1;
            (ci, row[i - 1].1.checked_mul(a).ok_or(Error::RankOverflow)?)
        } else if cj < ci {
            j += 1;
            (cj, pivot[j - 1].1.checked_mul(b).ok_or(Error::RankOverflow)?.checked_neg().ok_or(Error::RankOverflow)?)
        } else {
            i += 1;
            j += 1;
            let x = row[i - 1].1.checked_mul(a).ok_or(Error::RankOverflow)?;
            let y = pivot[j - 1].1.checked_mul(b).ok_or(Error::RankOverflow)?;
            (ci, x.checked_sub(y).ok_or(Error::RankOverflow)?)
        };
        if v != 0 {
            out.push((c, v));
        }
    }
    normalize(&mut out);
    Ok(out)
}

/// Rank of a sparse integer matrix given as rows of `(column, value)`.
///
/// Fraction-free elimination: each pivot row is scaled into the rows it
/// eliminates and every updated row is divided by the gcd of its entries, so
/// all arithmetic stays in the integers. Pivots are taken from the shortest
/// remaining row to limit fill.
pub fn integer_rank_sparse(ncols: usize, rows: &[Vec<(usize, i64)>]) -> Result<usize> {
    let mut work: Vec<SparseRow> = Vec::with_capacity(rows.len());
    for r in rows {
        let mut row: SparseRow = Vec::with_capacity(r.len());
        let mut sorted = r.clone();
        sorted.sort_by_key(|e| e.0);
        for (c, v) in sorted {
            if c >= ncols {
                return Err(Error::Dimension(format!("column {c} outside {ncols}")));
            }
            match row.last_mut() {
                Some(last) if last.0 == c => last.1 += v as i128,
                _ => row.push((c, v as i128)),
            }
        }
        row.retain(|e| e.1 != 0);
        normalize(&mut row);
        work.push(row);
    }
    let mut by_col: HashMap<usize, BTreeSet<usize>> = HashMap::new();
    let mut queue: BTreeSet<(usize, usize)> = BTreeSet::new();
    for (i, row) in work.iter().enumerate() {
        if !row.is_empty() {
            queue.insert((row.len(), i));
            for &(c, _) in row {
                by_col.entry(c).or_default().insert(i);
            }
        }
    }
    let mut rank = 0;
    while let Some((_, p)) = queue.pop_first() {
        let pivot_row = std::mem::take(&mut work[p]);
        for &(c, _) in &pivot_row {
            if let Some(s) = by_col.get_mut(&c) {
                s.remove(&p);
            }
        }
        // prefer a unit entry to keep numbers small
        let &(pc, pv) = pivot_row
            .iter()
            .find(|e| e.1.abs() == 1)
            .unwrap_or(&pivot_row[0]);
        rank += 1;
        let targets: Vec<usize> = by_col.get(&pc).map(|s| s.iter().copied().collect()).unwrap_or_default();
        for t in targets {
            let row = std::mem::take(&mut work[t]);
            queue.remove(&(row.len(), t));
            let tv = row.iter().find(|e| e.0 == pc).map(|e| e.1).unwrap_or(0);
            let g = gcd(pv, tv);
            let new = combine(&row, pv / g, &pivot_row, tv / g)?;
            for &(c, _) in &row {
                if let Some(s) = by_col.get_mut(&c) {
                    s.remove(&t);
                }
            }
            for &(c, _) in &new {
                by_col.entry(c).or_default().insert(t);
            }
            if !new.is_empty() {
                queue.insert((new.len(), t));
            }
            work[t] = new;
        }
    }
    Ok(rank)
}

/// Rank of a dense integer matrix.
pub fn integer_rank(m: &[Vec<i64>]) -> Result<usize> {
    let ncols = m.first().map_or(0, |r| r.len());
    let rows: Vec<Vec<(usize, i64)>> = m
        .iter()
        .map(|r| {
            r.iter()
                .enumerate()
                .filter(|e| *e.1 != 0)
                .map(|(c, &v)| (c, v))
                .collect()
        })
        .collect();
    integer_rank_sparse(ncols, &rows)
}
