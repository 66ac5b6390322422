//! Lookup-table q over the discretized Go-Right observation.

use crate::bounds::ActionSet;
use crate::env::goright::{MAX_PRIZE_INDICATORS, PRIZE_POSITION, STATUS_VALUES};
use crate::error::{invalid, Result};
use crate::value::ValueFunction;
use crate::{BoundingBox, Interval};

/// Discrete Go-Right key: nearest position, nearest status level, and
/// prize lights thresholded at 0.5.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GoRightKey {
    pub position: u8,
    pub status: u8,
    pub prizes: u32,
}

fn position_cell(x: f64) -> u8 {
    (x + 0.5).floor().clamp(0.0, PRIZE_POSITION as f64) as u8
}

fn status_cell(x: f64) -> usize {
    if x < 2.5 {
        0
    } else if x < 7.5 {
        1
    } else {
        2
    }
}

/// Maps a Go-Right observation to its discrete key.
pub fn discretize_goright(obs: &[f64]) -> GoRightKey {
    let mut prizes = 0u32;
    for (i, &x) in obs[2..].iter().enumerate() {
        if x >= 0.5 {
            prizes |= 1 << i;
        }
    }
    GoRightKey { position: position_cell(obs[0]), status: STATUS_VALUES[status_cell(obs[1])], prizes }
}

impl GoRightKey {
    /// Offset-free observation of this key.
    pub fn to_observation(&self, n: usize) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 + n);
        self.write_observation(n, &mut v);
        v
    }

    pub fn write_observation(&self, n: usize, out: &mut Vec<f64>) {
        out.clear();
        out.push(self.position as f64);
        out.push(self.status as f64);
        out.extend((0..n).map(|i| ((self.prizes >> i) & 1) as f64));
    }

    pub fn status_index(&self) -> usize {
        (self.status / 5) as usize
    }
}

/// The set of discrete keys whose observation cells intersect a box.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeyRange {
    pub position: (u8, u8),
    pub status: (usize, usize),
    /// Lights that are on for every key in the range.
    pub prizes_on: u32,
    /// Lights that may be on for some key in the range.
    pub prizes_may: u32,
}

impl KeyRange {
    pub fn of_box(b: &BoundingBox, n: usize) -> Result<Self> {
        if b.dim() != 2 + n {
            return invalid(format!("box has dimension {} but Go-Right-{n} needs {}", b.dim(), 2 + n));
        }
        let mut prizes_on = 0;
        let mut prizes_may = 0;
        for i in 0..n {
            let iv = b.interval(2 + i);
            if iv.lo() >= 0.5 {
                prizes_on |= 1 << i;
            }
            if iv.hi() >= 0.5 {
                prizes_may |= 1 << i;
            }
        }
        Ok(Self {
            position: (position_cell(b.lower()[0]), position_cell(b.upper()[0])),
            status: (status_cell(b.lower()[1]), status_cell(b.upper()[1])),
            prizes_on,
            prizes_may,
        })
    }

    pub fn contains(&self, key: &GoRightKey) -> bool {
        let s = key.status_index();
        (self.position.0..=self.position.1).contains(&key.position)
            && (self.status.0..=self.status.1).contains(&s)
            && key.prizes & self.prizes_on == self.prizes_on
            && key.prizes & !self.prizes_may == 0
    }

    pub fn num_keys(&self) -> u64 {
        let free = (self.prizes_may & !self.prizes_on).count_ones();
        (self.position.1 - self.position.0 + 1) as u64 * (self.status.1 - self.status.0 + 1) as u64 * (1u64 << free)
    }

    /// All keys in the range. Exponential in the number of undetermined lights.
    pub fn keys(&self) -> impl Iterator<Item = GoRightKey> + '_ {
        let free = self.prizes_may & !self.prizes_on;
        let free_bits: Vec<u32> = (0..32).filter(|i| free & (1 << i) != 0).collect();
        let (p0, p1) = self.position;
        let (s0, s1) = self.status;
        (p0..=p1).flat_map(move |p| {
            let free_bits = free_bits.clone();
            (s0..=s1).flat_map(move |s| {
                let free_bits = free_bits.clone();
                (0u32..(1 << free_bits.len())).map(move |m| {
                    let mut prizes = self.prizes_on;
                    for (j, bit) in free_bits.iter().enumerate() {
                        if m & (1 << j) != 0 {
                            prizes |= 1 << bit;
                        }
                    }
                    GoRightKey { position: p, status: STATUS_VALUES[s], prizes }
                })
            })
        })
    }
}

/// Dense lookup table over Go-Right keys. Unwritten entries read as 0.
#[derive(Clone, Debug)]
pub struct TabularQ {
    n: usize,
    table: Vec<f64>,
    written: Vec<bool>,
    written_list: Vec<u32>,
}

const NUM_ACTIONS: usize = 2;

impl TabularQ {
    pub fn new(num_prize_indicators: usize) -> Self {
        assert!((1..=MAX_PRIZE_INDICATORS).contains(&num_prize_indicators));
        let keys = (PRIZE_POSITION as usize + 1) * 3 << num_prize_indicators;
        Self {
            n: num_prize_indicators,
            table: vec![0.0; keys * NUM_ACTIONS],
            written: vec![false; keys * NUM_ACTIONS],
            written_list: Vec::new(),
        }
    }

    pub fn num_prize_indicators(&self) -> usize {
        self.n
    }

    fn key_index(&self, key: &GoRightKey) -> usize {
        ((key.position as usize * 3 + key.status_index()) << self.n) | key.prizes as usize
    }

    fn key_of_index(&self, idx: usize) -> GoRightKey {
        let prizes = (idx & ((1 << self.n) - 1)) as u32;
        let rest = idx >> self.n;
        GoRightKey { position: (rest / 3) as u8, status: STATUS_VALUES[rest % 3], prizes }
    }

    pub fn q_key(&self, key: &GoRightKey, a: usize) -> f64 {
        self.table[self.key_index(key) * NUM_ACTIONS + a]
    }

    pub fn set_key(&mut self, key: &GoRightKey, a: usize, value: f64) {
        let i = self.key_index(key) * NUM_ACTIONS + a;
        self.mark(i);
        self.table[i] = value;
    }

    fn mark(&mut self, i: usize) {
        if !self.written[i] {
            self.written[i] = true;
            self.written_list.push(i as u32);
        }
    }

    /// Keys (with actions) that have ever been written.
    pub fn written_entries(&self) -> impl Iterator<Item = (GoRightKey, usize, f64)> + '_ {
        self.written_list.iter().map(|&i| {
            let i = i as usize;
            (self.key_of_index(i / NUM_ACTIONS), i % NUM_ACTIONS, self.table[i])
        })
    }
}

impl ValueFunction for TabularQ {
    fn num_actions(&self) -> usize {
        NUM_ACTIONS
    }

    fn q(&self, s: &[f64], a: usize) -> f64 {
        self.q_key(&discretize_goright(s), a)
    }

    fn update(&mut self, s: &[f64], a: usize, target: f64, alpha: f64) {
        let i = self.key_index(&discretize_goright(s)) * NUM_ACTIONS + a;
        self.mark(i);
        self.table[i] += alpha * (target - self.table[i]);
    }

    /// Exact sup/inf: written entries inside the box are scanned directly, and
    /// the box contributes an implicit 0 whenever it holds an unwritten entry.
    fn q_bounds(&self, b: &BoundingBox, actions: &ActionSet) -> Result<Interval> {
        if actions.max() >= NUM_ACTIONS {
            return invalid("action out of range for Go-Right");
        }
        let range = KeyRange::of_box(b, self.n)?;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut counts = [0u64; NUM_ACTIONS];
        for &i in &self.written_list {
            let i = i as usize;
            let a = i % NUM_ACTIONS;
            if !actions.contains(a) || !range.contains(&self.key_of_index(i / NUM_ACTIONS)) {
                continue;
            }
            counts[a] += 1;
            lo = lo.min(self.table[i]);
            hi = hi.max(self.table[i]);
        }
        let total = range.num_keys();
        if actions.iter().any(|a| counts[a] < total) {
            lo = lo.min(0.0);
            hi = hi.max(0.0);
        }
        Ok(Interval::spanning(lo, hi))
    }
}
