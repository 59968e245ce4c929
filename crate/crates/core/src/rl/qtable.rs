use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;

use crate::collector::{classify, DiscreteState, Extreme};
use crate::error::{Error, Result};
use crate::rl::action::Action;
use crate::scalar::Scalar;
use crate::textio;

pub const QTABLE_HEADER: &str = "#qoco-qtable v1";

/// Dense state-action value table with an invalid-action mask.
#[derive(Clone, Debug, PartialEq)]
pub struct QTable<T> {
    states: usize,
    actions: usize,
    values: Vec<T>,
    masked: Vec<bool>,
}

impl<T: Scalar> QTable<T> {
    pub fn new(states: usize, actions: usize) -> Self {
        assert!(states > 0 && actions > 0, "table needs at least one state and action");
        Self {
            states,
            actions,
            values: vec![T::zero(); states * actions],
            masked: vec![false; states * actions],
        }
    }

    /// The 36 x 5 bandwidth table with increases masked in extreme-high
    /// states and decreases masked in extreme-low states.
    pub fn with_domain_mask() -> Self {
        let mut q = Self::new(DiscreteState::COUNT, Action::COUNT);
        for s in DiscreteState::all() {
            for a in Action::ALL {
                let m = match classify(s).extreme {
                    Some(Extreme::High) => a.is_increase(),
                    Some(Extreme::Low) => a.is_decrease(),
                    None => false,
                };
                q.set_masked(s.index(), a.index(), m);
            }
        }
        q
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    fn at(&self, s: usize, a: usize) -> usize {
        assert!(s < self.states && a < self.actions, "({s},{a}) out of range");
        s * self.actions + a
    }

    pub fn get(&self, s: usize, a: usize) -> T {
        self.values[self.at(s, a)]
    }

    pub fn set(&mut self, s: usize, a: usize, v: T) {
        let i = self.at(s, a);
        self.values[i] = v;
    }

    pub fn is_masked(&self, s: usize, a: usize) -> bool {
        self.masked[self.at(s, a)]
    }

    pub fn set_masked(&mut self, s: usize, a: usize, m: bool) {
        let i = self.at(s, a);
        self.masked[i] = m;
    }

    pub fn valid_actions(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.actions).filter(move |&a| !self.is_masked(s, a))
    }

    /// Highest-valued unmasked action; ties go to the earliest entry of
    /// `tie_order`. `None` when every action in `s` is masked.
    pub fn argmax(&self, s: usize, tie_order: &[usize]) -> Option<usize> {
        let mut best: Option<(usize, T)> = None;
        for &a in tie_order {
            if self.is_masked(s, a) {
                continue;
            }
            let v = self.get(s, a);
            match best {
                Some((_, bv)) if !(v > bv) => {}
                _ => best = Some((a, v)),
            }
        }
        best.map(|(a, _)| a)
    }

    pub fn max_value(&self, s: usize, tie_order: &[usize]) -> Option<T> {
        self.argmax(s, tie_order).map(|a| self.get(s, a))
    }

    pub fn copy_values_from(&mut self, other: &QTable<T>) {
        assert_eq!((self.states, self.actions), (other.states, other.actions));
        self.values.copy_from_slice(&other.values);
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }
}

/// Epsilon-greedy choice over unmasked actions. Exploration draws
/// uniformly from the valid set.
pub fn select_action<T: Scalar, R: Rng + ?Sized>(
    q: &QTable<T>,
    s: usize,
    epsilon: f64,
    tie_order: &[usize],
    rng: &mut R,
) -> Result<usize> {
    let valid: Vec<usize> = q.valid_actions(s).collect();
    if valid.is_empty() {
        return Err(Error::AllActionsMasked {
            state: s.to_string(),
        });
    }
    if rng.random::<f64>() < epsilon {
        return Ok(valid[rng.random_range(0..valid.len())]);
    }
    Ok(q.argmax(s, tie_order).expect("valid set is non-empty"))
}

/// Extra `#key value` lines carried alongside a saved table.
pub type TableMeta = BTreeMap<String, String>;

/// Writes a bandwidth table as `w,p,b,action,value` rows, one per entry,
/// with masked entries written as `INVALID`.
pub fn save_qtable<T: Scalar>(
    q: &QTable<T>,
    bands: &str,
    meta: &TableMeta,
    path: &Path,
) -> Result<()> {
    assert_eq!((q.states(), q.actions()), (DiscreteState::COUNT, Action::COUNT));
    let mut out = String::new();
    out.push_str(QTABLE_HEADER);
    out.push('\n');
    out.push_str(&format!("#bands {bands}\n"));
    for (k, v) in meta {
        out.push_str(&format!("#{k} {v}\n"));
    }
    out.push_str("w,p,b,action,value\n");
    for s in DiscreteState::all() {
        for a in Action::ALL {
            let value = if q.is_masked(s.index(), a.index()) {
                "INVALID".to_string()
            } else {
                format!("{:?}", q.get(s.index(), a.index()).as_f64())
            };
            out.push_str(&format!("{},{},{},{},{}\n", s.w, s.p, s.b, a, value));
        }
    }
    textio::write_file(path, &out)
}

/// Reads a table written by [`save_qtable`]; returns the table, its band
/// fingerprint and any extra metadata. Every state-action pair must appear
/// exactly once.
pub fn load_qtable<T: Scalar>(path: &Path) -> Result<(QTable<T>, String, TableMeta)> {
    let rows = textio::read_rows(path, QTABLE_HEADER)?;
    if rows.is_empty() {
        return Err(Error::Header {
            path: path.to_path_buf(),
            expected: QTABLE_HEADER,
        });
    }
    let mut q = QTable::new(DiscreteState::COUNT, Action::COUNT);
    let mut seen = [false; DiscreteState::COUNT * Action::COUNT];
    let mut bands = None;
    let mut meta = TableMeta::new();
    for (line, row) in rows {
        if let Some(rest) = row.strip_prefix('#') {
            let (k, v) = rest.split_once(' ').unwrap_or((rest, ""));
            if k == "bands" {
                bands = Some(v.trim().to_string());
            } else {
                meta.insert(k.to_string(), v.trim().to_string());
            }
            continue;
        }
        if row == "w,p,b,action,value" {
            continue;
        }
        let c = textio::columns(path, line, &row, 5)?;
        let w = textio::field(path, line, "watermark level", c[0])?;
        let p = textio::field(path, line, "processing level", c[1])?;
        let b = textio::field(path, line, "bdp level", c[2])?;
        let a: Action = textio::field(path, line, "action", c[3])?;
        let s = DiscreteState::new(w, p, b);
        let i = s.index() * Action::COUNT + a.index();
        if seen[i] {
            return Err(Error::parse(path, line, format!("duplicate entry for {s} {a}")));
        }
        seen[i] = true;
        if c[4] == "INVALID" {
            q.set_masked(s.index(), a.index(), true);
        } else {
            let v: f64 = textio::field(path, line, "value", c[4])?;
            q.set(s.index(), a.index(), T::lit(v));
        }
    }
    if let Some(i) = seen.iter().position(|x| !x) {
        let s = DiscreteState::from_index(i / Action::COUNT);
        let a = Action::from_index(i % Action::COUNT);
        return Err(Error::parse(path, 0, format!("missing entry for {s} {a}")));
    }
    let bands = bands.ok_or_else(|| Error::parse(path, 0, "missing #bands line"))?;
    Ok((q, bands, meta))
}
