//! The oriented lattice, bond randomness, and the bit-parallel row update.
//!
//! Sites are the points `(y, n)` with `y + n` even and `n >= 0`; each site has
//! two upward bonds, to `(y - 1, n + 1)` and to `(y + 1, n + 1)`.
//!
//! Rows are stored in *lane* coordinates `c = (y + n) / 2`. In lanes the left
//! child of `c` is `c` and the right child is `c + 1`, so one level of the
//! process is a masked copy plus a masked one-bit shift:
//!
//! ```text
//! next = (row & left) | ((row & right) << 1)
//! ```
//!
//! Word `k` of a row always holds lanes `64k .. 64k + 63`, independent of the
//! window it was allocated for, so bond words line up across processes that
//! share a realization.

use std::collections::HashSet;
use std::fmt;

use crate::error::{argument, check_probability, Error, Result};
use crate::rng::{bernoulli_word, domain, StreamKey, Threshold};

const WORD_BITS: i64 = 64;

#[inline]
pub(crate) fn lane_of(y: i64, level: u32) -> i64 {
    (y + level as i64) / 2
}

#[inline]
fn site_of(lane: i64, level: u32) -> i64 {
    2 * lane - level as i64
}

#[inline]
pub(crate) fn word_of(lane: i64) -> i64 {
    lane.div_euclid(WORD_BITS)
}

#[inline]
pub(crate) fn bit_of(lane: i64) -> u32 {
    lane.rem_euclid(WORD_BITS) as u32
}

/// Bits `lo..=hi` (both within `0..64`) set.
#[inline]
fn bit_range(lo: u32, hi: u32) -> u64 {
    debug_assert!(lo <= hi && hi < 64);
    (!0u64 >> (63 - hi)) & (!0u64 << lo)
}

/// Mask of the lanes of word `k` that fall inside `[lo, hi]`.
#[inline]
fn lane_mask(k: i64, lo: i64, hi: i64) -> u64 {
    let first = k * WORD_BITS;
    let last = first + WORD_BITS - 1;
    if hi < first || lo > last || lo > hi {
        0
    } else {
        bit_range((lo.max(first) - first) as u32, (hi.min(last) - first) as u32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Site {
    y: i64,
    n: u32,
}

impl Site {
    pub fn new(y: i64, n: u32) -> Result<Self> {
        if (y + n as i64).rem_euclid(2) != 0 {
            return Err(Error::Parity { y, level: n });
        }
        Ok(Site { y, n })
    }

    pub fn y(&self) -> i64 {
        self.y
    }

    pub fn n(&self) -> u32 {
        self.n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// Bond to `(y - 1, n + 1)`.
    Left,
    /// Bond to `(y + 1, n + 1)`.
    Right,
}

impl Direction {
    fn index(self) -> usize {
        match self {
            Direction::Left => 0,
            Direction::Right => 1,
        }
    }
}

/// The set of wet sites at one level, as a lane bitset.
#[derive(Clone)]
pub struct WetRow {
    level: u32,
    base: i64,
    words: Vec<u64>,
}

impl WetRow {
    pub fn empty(level: u32) -> Self {
        WetRow {
            level,
            base: 0,
            words: Vec::new(),
        }
    }

    pub fn from_sites(level: u32, sites: impl IntoIterator<Item = i64>) -> Result<Self> {
        let mut lanes = Vec::new();
        for y in sites {
            Site::new(y, level)?;
            lanes.push(lane_of(y, level));
        }
        let (Some(&lo), Some(&hi)) = (lanes.iter().min(), lanes.iter().max()) else {
            return Ok(WetRow::empty(level));
        };
        let base = word_of(lo);
        let mut row = WetRow::zeroed(level, base, (word_of(hi) - base + 1) as usize);
        for c in lanes {
            row.words[(word_of(c) - base) as usize] |= 1 << bit_of(c);
        }
        Ok(row)
    }

    /// Every parity-compatible site in `[lo, hi]`.
    pub fn interval(level: u32, lo: i64, hi: i64) -> Self {
        let first = lane_of_ceil(lo, level);
        let last = lane_of_floor(hi, level);
        if first > last {
            return WetRow::empty(level);
        }
        let base = word_of(first);
        let len = (word_of(last) - base + 1) as usize;
        let mut row = WetRow::zeroed(level, base, len);
        for (i, w) in row.words.iter_mut().enumerate() {
            *w = lane_mask(base + i as i64, first, last);
        }
        row
    }

    pub(crate) fn zeroed(level: u32, base: i64, len: usize) -> Self {
        WetRow {
            level,
            base,
            words: vec![0; len],
        }
    }

    /// Same sites, re-allocated over words `base .. base + len`.
    pub(crate) fn respan(&self, base: i64, len: usize) -> Result<Self> {
        let mut out = WetRow::zeroed(self.level, base, len);
        for (i, &w) in self.words.iter().enumerate() {
            if w == 0 {
                continue;
            }
            let k = self.base + i as i64 - base;
            if k < 0 || k >= len as i64 {
                return Err(Error::WindowViolation { level: self.level });
            }
            out.words[k as usize] = w;
        }
        Ok(out)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    pub(crate) fn words_mut(&mut self) -> &mut [u64] {
        &mut self.words
    }

    pub fn len(&self) -> u64 {
        self.words.iter().map(|w| w.count_ones() as u64).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    #[inline]
    fn word(&self, k: i64) -> u64 {
        let i = k - self.base;
        if i < 0 || i >= self.words.len() as i64 {
            0
        } else {
            self.words[i as usize]
        }
    }

    fn lowest_lane(&self) -> Option<i64> {
        self.words
            .iter()
            .position(|&w| w != 0)
            .map(|i| (self.base + i as i64) * WORD_BITS + self.words[i].trailing_zeros() as i64)
    }

    fn highest_lane(&self) -> Option<i64> {
        self.words.iter().rposition(|&w| w != 0).map(|i| {
            (self.base + i as i64) * WORD_BITS + (63 - self.words[i].leading_zeros()) as i64
        })
    }

    pub fn min(&self) -> Option<i64> {
        self.lowest_lane().map(|c| site_of(c, self.level))
    }

    pub fn max(&self) -> Option<i64> {
        self.highest_lane().map(|c| site_of(c, self.level))
    }

    /// `max - min`, defined only for a non-empty row.
    pub fn diameter(&self) -> Option<u64> {
        Some((self.max()? - self.min()?) as u64)
    }

    pub fn contains(&self, y: i64) -> bool {
        if (y + self.level as i64).rem_euclid(2) != 0 {
            return false;
        }
        let c = lane_of(y, self.level);
        self.word(word_of(c)) >> bit_of(c) & 1 == 1
    }

    /// Number of wet sites in `[lo, hi]`.
    pub fn count_in(&self, lo: i64, hi: i64) -> u64 {
        let first = lane_of_ceil(lo, self.level);
        let last = lane_of_floor(hi, self.level);
        if first > last {
            return 0;
        }
        (word_of(first).max(self.base)..=word_of(last).min(self.base + self.words.len() as i64 - 1))
            .map(|k| (self.word(k) & lane_mask(k, first, last)).count_ones() as u64)
            .sum()
    }

    /// The sites of this row inside `[lo, hi]`.
    pub fn restricted(&self, lo: i64, hi: i64) -> WetRow {
        let first = lane_of_ceil(lo, self.level);
        let last = lane_of_floor(hi, self.level);
        let mut out = self.clone();
        for (i, w) in out.words.iter_mut().enumerate() {
            *w &= lane_mask(self.base + i as i64, first, last);
        }
        out
    }

    pub fn is_subset_of(&self, other: &WetRow) -> bool {
        self.level == other.level
            && self
                .words
                .iter()
                .enumerate()
                .all(|(i, &w)| w & !other.word(self.base + i as i64) == 0)
    }

    /// Wet sites in increasing order.
    pub fn sites(&self) -> impl Iterator<Item = i64> + '_ {
        let level = self.level;
        self.words.iter().enumerate().flat_map(move |(i, &w)| {
            let k = self.base + i as i64;
            BitIter(w).map(move |b| site_of(k * WORD_BITS + b as i64, level))
        })
    }
}

struct BitIter(u64);

impl Iterator for BitIter {
    type Item = u32;

    #[inline]
    fn next(&mut self) -> Option<u32> {
        if self.0 == 0 {
            return None;
        }
        let b = self.0.trailing_zeros();
        self.0 &= self.0 - 1;
        Some(b)
    }
}

fn lane_of_ceil(y: i64, level: u32) -> i64 {
    // smallest lane whose site is >= y
    (y + level as i64 + 1).div_euclid(2)
}

fn lane_of_floor(y: i64, level: u32) -> i64 {
    (y + level as i64).div_euclid(2)
}

impl PartialEq for WetRow {
    fn eq(&self, other: &Self) -> bool {
        if self.level != other.level {
            return false;
        }
        let lo = self.base.min(other.base);
        let hi = (self.base + self.words.len() as i64).max(other.base + other.words.len() as i64);
        (lo..hi).all(|k| self.word(k) == other.word(k))
    }
}

impl Eq for WetRow {}

impl fmt::Debug for WetRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "WetRow(n={}, ", self.level)?;
        f.debug_set().entries(self.sites()).finish()?;
        write!(f, ")")
    }
}

/// Trapezoid `{(y, n): n < height, x_min - n <= y <= x_max + n}` of sites
/// whose outgoing bonds are defined. It is exactly the forward light cone of
/// `[x_min, x_max]`, so a row that starts inside at level 0 stays inside.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BondWindow {
    x_min: i64,
    x_max: i64,
    height: u32,
}

impl BondWindow {
    pub fn new(x_min: i64, x_max: i64, height: u32) -> Result<Self> {
        if x_min > x_max {
            return Err(argument(format!("empty bond window [{x_min}, {x_max}]")));
        }
        Ok(BondWindow {
            x_min,
            x_max,
            height,
        })
    }

    pub fn centered(half_width: i64, height: u32) -> Self {
        BondWindow {
            x_min: -half_width.abs(),
            x_max: half_width.abs(),
            height,
        }
    }

    pub fn x_min(&self) -> i64 {
        self.x_min
    }

    pub fn x_max(&self) -> i64 {
        self.x_max
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    fn lanes(&self, level: u32) -> (i64, i64) {
        (self.x_min.div_euclid(2) + self.x_min.rem_euclid(2), self.x_max.div_euclid(2) + level as i64)
    }

    /// Whether the site's row position lies in the trapezoid (bonds from it
    /// exist only when additionally `n < height`).
    pub fn contains(&self, site: Site) -> bool {
        let (lo, hi) = self.lanes(site.n);
        let c = lane_of(site.y, site.n);
        site.n <= self.height && lo <= c && c <= hi
    }

    fn row_inside(&self, row: &WetRow) -> bool {
        let (lo, hi) = self.lanes(row.level);
        match (row.lowest_lane(), row.highest_lane()) {
            (Some(a), Some(b)) => lo <= a && b <= hi && row.level <= self.height,
            _ => row.level <= self.height,
        }
    }

    /// Words covering every lane of the trapezoid up to and including `height`.
    fn word_span(&self) -> (i64, usize) {
        let (lo, _) = self.lanes(0);
        let (_, hi) = self.lanes(self.height);
        let base = word_of(lo);
        (base, (word_of(hi) - base + 1) as usize)
    }

    /// Number of bonds in the window.
    pub fn bond_count(&self) -> u64 {
        (0..self.height)
            .map(|n| {
                let (lo, hi) = self.lanes(n);
                2 * (hi - lo + 1).max(0) as u64
            })
            .sum()
    }
}

#[derive(Clone)]
enum BondSource {
    /// Lazily derived from the trial stream.
    Derived { key: StreamKey, threshold: Threshold },
    /// Explicit openness, `levels[n][dir]` over the window's word span.
    Stored { base: i64, levels: Vec<[Vec<u64>; 2]> },
}

/// The open/closed state of every bond of a window for one trial.
#[derive(Clone)]
pub struct BondRealization {
    p: f64,
    window: BondWindow,
    source: BondSource,
}

impl BondRealization {
    /// Bonds drawn from the counter-based stream of `(seed, trial)`; the state
    /// of bond `(y, n, dir)` does not depend on the window.
    pub fn derived(p: f64, window: BondWindow, seed: u64, trial: u64) -> Result<Self> {
        check_probability(p)?;
        Ok(BondRealization {
            p,
            window,
            source: BondSource::Derived {
                key: StreamKey::new(seed, trial).child(domain::BONDS),
                threshold: Threshold::from_probability(p),
            },
        })
    }

    /// Explicit realization: the listed bonds are open, every other bond closed.
    pub fn from_open_bonds(
        p: f64,
        window: BondWindow,
        open: impl IntoIterator<Item = (Site, Direction)>,
    ) -> Result<Self> {
        check_probability(p)?;
        let (base, len) = window.word_span();
        let mut levels = vec![[vec![0u64; len], vec![0u64; len]]; window.height as usize];
        for (site, dir) in open {
            if site.n >= window.height || !window.contains(site) {
                return Err(argument(format!(
                    "bond from ({}, {}) is outside the window",
                    site.y, site.n
                )));
            }
            let c = lane_of(site.y, site.n);
            levels[site.n as usize][dir.index()][(word_of(c) - base) as usize] |= 1 << bit_of(c);
        }
        Ok(BondRealization {
            p,
            window,
            source: BondSource::Stored { base, levels },
        })
    }

    pub fn all_open(window: BondWindow) -> Self {
        let mut sites = Vec::new();
        for n in 0..window.height {
            let (lo, hi) = window.lanes(n);
            for c in lo..=hi {
                sites.push(Site { y: site_of(c, n), n });
            }
        }
        let bonds = sites
            .into_iter()
            .flat_map(|s| [(s, Direction::Left), (s, Direction::Right)]);
        BondRealization::from_open_bonds(1.0, window, bonds).expect("bonds inside window")
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn window(&self) -> &BondWindow {
        &self.window
    }

    pub fn is_open(&self, site: Site, dir: Direction) -> bool {
        if site.n >= self.window.height || !self.window.contains(site) {
            return false;
        }
        let c = lane_of(site.y, site.n);
        let mut left = [0u64];
        let mut right = [0u64];
        self.fill_masks(site.n, word_of(c), &mut left, &mut right);
        let w = match dir {
            Direction::Left => left[0],
            Direction::Right => right[0],
        };
        w >> bit_of(c) & 1 == 1
    }

    /// Writes the bond masks of `level` for words `base .. base + left.len()`.
    /// Lanes outside the trapezoid come out closed.
    pub(crate) fn fill_masks(&self, level: u32, base: i64, left: &mut [u64], right: &mut [u64]) {
        debug_assert_eq!(left.len(), right.len());
        let (lo, hi) = self.window.lanes(level);
        if level >= self.window.height {
            left.fill(0);
            right.fill(0);
            return;
        }
        match &self.source {
            BondSource::Derived { key, threshold } => {
                let level_key = key.child(level as u64);
                for (i, (l, r)) in left.iter_mut().zip(right.iter_mut()).enumerate() {
                    let k = base + i as i64;
                    let inside = lane_mask(k, lo, hi);
                    if inside == 0 {
                        *l = 0;
                        *r = 0;
                        continue;
                    }
                    // counter layout: word index | digit (6 bits) | direction (1 bit)
                    let word_ctr = (k as u64) << 7;
                    *l = inside & bernoulli_word(*threshold, |d| level_key.at(word_ctr | (d as u64) << 1));
                    *r = inside & bernoulli_word(*threshold, |d| level_key.at(word_ctr | (d as u64) << 1 | 1));
                }
            }
            BondSource::Stored { base: sb, levels } => {
                let [sl, sr] = &levels[level as usize];
                for (i, (l, r)) in left.iter_mut().zip(right.iter_mut()).enumerate() {
                    let j = base + i as i64 - sb;
                    if j < 0 || j >= sl.len() as i64 {
                        *l = 0;
                        *r = 0;
                    } else {
                        *l = sl[j as usize];
                        *r = sr[j as usize];
                    }
                }
            }
        }
    }
}

/// Core update over aligned word slices; returns the bit shifted out of the top.
#[inline]
pub(crate) fn step_words(cur: &[u64], left: &[u64], right: &[u64], next: &mut [u64]) -> u64 {
    let mut carry = 0u64;
    for (((n, &c), &l), &r) in next.iter_mut().zip(cur).zip(left).zip(right) {
        let to_right = c & r;
        *n = (c & l) | (to_right << 1) | carry;
        carry = to_right >> 63;
    }
    carry
}

/// One level of the process: `y` is wet at `n + 1` iff `y + 1` is wet with its
/// left bond open or `y - 1` is wet with its right bond open.
pub fn step(row: &WetRow, bonds: &BondRealization) -> Result<WetRow> {
    let window = bonds.window();
    if row.level >= window.height || !window.row_inside(row) {
        return Err(Error::WindowViolation { level: row.level });
    }
    let len = row.words.len();
    let mut left = vec![0; len];
    let mut right = vec![0; len];
    bonds.fill_masks(row.level, row.base, &mut left, &mut right);
    let mut next = WetRow::zeroed(row.level + 1, row.base, len + 1);
    let carry = step_words(&row.words, &left, &right, &mut next.words[..len]);
    next.words[len] = carry;
    Ok(next)
}

/// Several processes driven by one bond realization, advanced in lockstep.
///
/// All rows share the window's word span; bond masks for a level are drawn
/// once and applied to every row.
pub struct CoupledEvolution<'a> {
    bonds: &'a BondRealization,
    rows: Vec<WetRow>,
    spare: Vec<WetRow>,
    left: Vec<u64>,
    right: Vec<u64>,
    base: i64,
    level: u32,
}

impl<'a> CoupledEvolution<'a> {
    pub fn new(initials: &[WetRow], bonds: &'a BondRealization) -> Result<Self> {
        let Some(first) = initials.first() else {
            return Err(argument("no initial rows"));
        };
        let level = first.level;
        let window = bonds.window();
        let (base, len) = window.word_span();
        let mut rows = Vec::with_capacity(initials.len());
        for row in initials {
            if row.level != level {
                return Err(argument("initial rows are at different levels"));
            }
            if !window.row_inside(row) {
                return Err(Error::WindowViolation { level });
            }
            rows.push(row.respan(base, len)?);
        }
        let spare = rows.clone();
        Ok(CoupledEvolution {
            bonds,
            rows,
            spare,
            left: vec![0; len],
            right: vec![0; len],
            base,
            level,
        })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn rows(&self) -> &[WetRow] {
        &self.rows
    }

    pub fn advance(&mut self) -> Result<()> {
        let window = self.bonds.window();
        if self.level >= window.height {
            return Err(Error::WindowViolation { level: self.level });
        }
        // Only words the trapezoid reaches at this level can hold wet sites.
        let (lo, hi) = window.lanes(self.level);
        let a = (word_of(lo) - self.base) as usize;
        let b = (word_of(hi) - self.base) as usize;
        let (left, right) = (&mut self.left[a..=b], &mut self.right[a..=b]);
        self.bonds.fill_masks(self.level, self.base + a as i64, left, right);
        for (cur, next) in self.rows.iter().zip(self.spare.iter_mut()) {
            next.level = self.level + 1;
            let carry = step_words(&cur.words[a..=b], left, right, &mut next.words[a..=b]);
            if b + 1 < next.words.len() {
                next.words[b + 1] = carry;
            } else {
                debug_assert_eq!(carry, 0);
            }
        }
        std::mem::swap(&mut self.rows, &mut self.spare);
        self.level += 1;
        Ok(())
    }
}

/// Evolves every initial row on the same realization and returns one
/// trajectory (levels `start ..= start + horizon`) per initial row.
pub fn evolve_coupled(
    initials: &[WetRow],
    bonds: &BondRealization,
    horizon: u32,
) -> Result<Vec<Vec<WetRow>>> {
    let mut evo = CoupledEvolution::new(initials, bonds)?;
    if evo.level() + horizon > bonds.window().height() {
        return Err(argument(format!(
            "horizon {horizon} exceeds the bond window height {}",
            bonds.window().height()
        )));
    }
    let mut out: Vec<Vec<WetRow>> = evo.rows().iter().map(|r| vec![r.clone()]).collect();
    for _ in 0..horizon {
        evo.advance()?;
        for (traj, row) in out.iter_mut().zip(evo.rows()) {
            traj.push(row.clone());
        }
    }
    Ok(out)
}

/// Bonds of `window` whose state is listed explicitly, for hand-built tests.
pub fn bonds_from_list(p: f64, window: BondWindow, open: &[(i64, u32, Direction)]) -> Result<BondRealization> {
    let mut seen = HashSet::new();
    let mut list = Vec::with_capacity(open.len());
    for &(y, n, d) in open {
        if seen.insert((y, n, d)) {
            list.push((Site::new(y, n)?, d));
        }
    }
    BondRealization::from_open_bonds(p, window, list)
}

#[cfg(test)]
mod tests {
    use super::*;
    use Direction::{Left, Right};

    fn row(level: u32, sites: &[i64]) -> WetRow {
        WetRow::from_sites(level, sites.iter().copied()).unwrap()
    }

    #[test]
    fn site_parity() {
        assert!(Site::new(0, 0).is_ok());
        assert!(Site::new(-3, 1).is_ok());
        assert_eq!(Site::new(1, 0), Err(Error::Parity { y: 1, level: 0 }));
        assert!(WetRow::from_sites(2, [0, 1]).is_err());
    }

    #[test]
    fn row_queries() {
        let r = row(3, &[-3, 1, 3, 201, -131]);
        assert_eq!(r.len(), 5);
        assert_eq!(r.min(), Some(-131));
        assert_eq!(r.max(), Some(201));
        assert_eq!(r.diameter(), Some(332));
        assert!(r.contains(201) && !r.contains(-1) && !r.contains(0));
        assert_eq!(r.sites().collect::<Vec<_>>(), vec![-131, -3, 1, 3, 201]);
        assert_eq!(r.count_in(-3, 3), 3);
        assert_eq!(r.count_in(-2, 2), 1);
        assert_eq!(r.restricted(0, 200), row(3, &[1, 3]));
        assert!(row(3, &[1, 3]).is_subset_of(&r));
        assert!(!r.is_subset_of(&row(3, &[1, 3])));
        assert_eq!(WetRow::empty(4).min(), None);
        assert_eq!(WetRow::empty(4).diameter(), None);
    }

    #[test]
    fn interval_rows() {
        let r = WetRow::interval(1, -4, 4);
        assert_eq!(r.sites().collect::<Vec<_>>(), vec![-3, -1, 1, 3]);
        let r = WetRow::interval(0, -130, 70);
        assert_eq!(r.len(), 101);
        assert_eq!((r.min(), r.max()), (Some(-130), Some(70)));
        assert!(WetRow::interval(0, 1, 1).is_empty());
    }

    #[test]
    fn equality_ignores_allocation() {
        let a = row(0, &[0, 2]);
        let b = a.respan(-3, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, row(0, &[0]));
        assert_ne!(row(0, &[]), WetRow::empty(2));
    }

    #[test]
    fn step_full_wetting() {
        let w = BondWindow::centered(0, 1);
        let bonds = bonds_from_list(1.0, w, &[(0, 0, Left), (0, 0, Right)]).unwrap();
        assert_eq!(step(&row(0, &[0]), &bonds).unwrap(), row(1, &[-1, 1]));
    }

    #[test]
    fn step_extinction() {
        let w = BondWindow::centered(0, 1);
        let bonds = bonds_from_list(0.0, w, &[]).unwrap();
        let next = step(&row(0, &[0]), &bonds).unwrap();
        assert!(next.is_empty());
        assert_eq!(next.level(), 1);
    }

    #[test]
    fn step_merge_from_two_sides() {
        // -1 -> 0 through its right bond, +1 -> 0 through its left bond.
        let w = BondWindow::centered(0, 2);
        let bonds = bonds_from_list(0.5, w, &[(-1, 1, Right), (1, 1, Left)]).unwrap();
        assert_eq!(step(&row(1, &[-1, 1]), &bonds).unwrap(), row(2, &[0]));
    }

    #[test]
    fn step_window_violation() {
        let w = BondWindow::centered(2, 3);
        let bonds = BondRealization::all_open(w);
        assert_eq!(
            step(&row(0, &[4]), &bonds).unwrap_err(),
            Error::WindowViolation { level: 0 }
        );
        assert!(step(&row(3, &[1]), &bonds).is_err());
    }

    #[test]
    fn step_across_word_boundaries() {
        // Lanes 63 and 64 straddle a word boundary at level 1: y = 125, 127.
        let w = BondWindow::centered(200, 3);
        let bonds = BondRealization::all_open(w);
        let next = step(&row(1, &[125, -129]), &bonds).unwrap();
        assert_eq!(next, row(2, &[-130, -128, 124, 126]));
    }

    #[test]
    fn is_open_reads_back_stored_bonds() {
        let w = BondWindow::centered(4, 3);
        let bonds = bonds_from_list(0.5, w, &[(2, 0, Left), (-5, 1, Right)]).unwrap();
        let s = |y, n| Site::new(y, n).unwrap();
        assert!(bonds.is_open(s(2, 0), Left));
        assert!(!bonds.is_open(s(2, 0), Right));
        assert!(bonds.is_open(s(-5, 1), Right));
        assert!(!bonds.is_open(s(0, 2), Left));
    }

    #[test]
    fn derived_bonds_do_not_depend_on_window() {
        let a = BondRealization::derived(0.6, BondWindow::centered(100, 20), 7, 3).unwrap();
        let b = BondRealization::derived(0.6, BondWindow::new(-40, 300, 30).unwrap(), 7, 3).unwrap();
        for n in 0..20u32 {
            for y in (-40 - n as i64..=100 + n as i64).filter(|y| (y + n as i64) % 2 == 0) {
                let s = Site::new(y, n).unwrap();
                for d in [Left, Right] {
                    assert_eq!(a.is_open(s, d), b.is_open(s, d), "({y},{n}) {d:?}");
                }
            }
        }
    }

    #[test]
    fn evolve_all_open_three_levels() {
        let w = BondWindow::centered(0, 3);
        let bonds = BondRealization::all_open(w);
        let trajs = evolve_coupled(&[row(0, &[0])], &bonds, 3).unwrap();
        assert_eq!(trajs[0][3], row(3, &[-3, -1, 1, 3]));
        assert_eq!(trajs[0][3].len(), 4);
    }

    #[test]
    fn evolve_matches_repeated_step() {
        let w = BondWindow::centered(150, 60);
        let bonds = BondRealization::derived(0.7, w, 11, 0).unwrap();
        let start = WetRow::interval(0, -150, 150);
        let trajs = evolve_coupled(&[row(0, &[0]), start.clone()], &bonds, 60).unwrap();
        let mut r = start;
        for n in 0..60 {
            assert_eq!(r, trajs[1][n]);
            r = step(&r, &bonds).unwrap();
        }
        assert_eq!(r, trajs[1][60]);
    }

    #[test]
    fn evolve_rejects_bad_input() {
        let w = BondWindow::centered(4, 3);
        let bonds = BondRealization::all_open(w);
        assert!(evolve_coupled(&[], &bonds, 1).is_err());
        assert!(evolve_coupled(&[row(0, &[0])], &bonds, 4).is_err());
        assert!(evolve_coupled(&[row(0, &[0]), row(1, &[1])], &bonds, 1).is_err());
    }

    #[test]
    fn half_lines_sandwich_origin() {
        let n = 80;
        let w = BondWindow::centered(2 * n as i64, n);
        let bonds = BondRealization::derived(0.5, w, 1234, 0).unwrap();
        let origin = row(0, &[0]);
        let left = WetRow::interval(0, -2 * n as i64, 0);
        let right = WetRow::interval(0, 0, 2 * n as i64);
        let t = evolve_coupled(&[origin, left, right], &bonds, n).unwrap();
        for lvl in 0..=n as usize {
            assert!(t[0][lvl].is_subset_of(&t[1][lvl]));
            assert!(t[0][lvl].is_subset_of(&t[2][lvl]));
        }
    }
}
