//! Rank abstraction of Q-tables.
//!
//! Two tables are order-equivalent when, at every state, they order the
//! actions the same way (ties included). Teaching only needs this ordering: a
//! learner's behavior depends on it alone, and whatever a teacher can do to
//! one member of an equivalence class it can mirror on any other.

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::env::{ActionId, StateId};
use crate::learner::QTable;

/// Number of actions at `s` strictly preferred to `a`.
pub fn rank_of(q: &QTable, s: StateId, a: ActionId) -> usize {
    let v = q.get(s, a);
    q.row(s).iter().filter(|x| **x > v).count()
}

/// Within-state ordering of actions as a rank vector: entry `a` counts the
/// actions strictly above `a`. Equal entries are tied.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeakOrder(pub Vec<u8>);

impl WeakOrder {
    pub fn of_row(row: &[f64]) -> Self {
        WeakOrder(row.iter().map(|v| row.iter().filter(|x| *x > v).count() as u8).collect())
    }

    pub fn all_tied(n_actions: usize) -> Self {
        WeakOrder(vec![0; n_actions])
    }

    pub fn n_actions(&self) -> usize {
        self.0.len()
    }

    /// Actions the greedy policy may pick.
    pub fn top(&self) -> impl Iterator<Item = ActionId> + '_ {
        self.0.iter().enumerate().filter(|(_, r)| **r == 0).map(|(i, _)| ActionId(i))
    }

    pub fn is_strict_top(&self, a: ActionId) -> bool {
        self.0[a.0] == 0 && self.0.iter().enumerate().all(|(i, r)| i == a.0 || *r > 0)
    }

    /// ε-greedy action probabilities under this ordering.
    pub fn action_probs(&self, epsilon: f64) -> Vec<f64> {
        let n = self.n_actions() as f64;
        let n_top = self.top().count() as f64;
        self.0.iter().map(|r| epsilon / n + if *r == 0 { (1.0 - epsilon) / n_top } else { 0.0 }).collect()
    }

    /// Distinct rank levels of the actions other than `taken`, best first.
    fn other_levels(&self, taken: ActionId) -> Vec<u8> {
        let set: BTreeSet<u8> = self.0.iter().enumerate().filter(|(i, _)| *i != taken.0).map(|(_, r)| *r).collect();
        set.into_iter().collect()
    }

    /// Number of placements available for `taken`: one strictly between each
    /// pair of adjacent levels of the other actions (including above the top and
    /// below the bottom) plus one tied with each level.
    pub fn n_placements(&self, taken: ActionId) -> usize {
        2 * self.other_levels(taken).len() + 1
    }

    /// Ordering after moving `taken` to placement `slot`; other actions keep
    /// their relative order.
    pub fn place(&self, taken: ActionId, slot: RankAction) -> Option<WeakOrder> {
        let levels = self.other_levels(taken);
        let slot = slot.0 as usize;
        if slot > 2 * levels.len() {
            return None;
        }
        // proxy values: others at -2*level_index, taken on or between them
        let level_value = |rank: u8| -2.0 * levels.iter().position(|l| *l == rank).expect("level exists") as f64;
        let taken_value = -(slot as f64) + 1.0;
        let row: Vec<f64> = self.0.iter().enumerate().map(|(i, r)| if i == taken.0 { taken_value } else { level_value(*r) }).collect();
        Some(WeakOrder::of_row(&row))
    }
}

/// Where the teacher puts the just-updated entry relative to the other
/// actions' values at that state.
///
/// With the other actions' distinct values sorted best first as
/// `v_0 > v_1 > … > v_{L-1}`, slot `2i` lies strictly between `v_{i-1}` and
/// `v_i` (open-ended at the extremes) and slot `2i+1` ties with `v_i`. With two
/// actions this is [`RankAction::ABOVE`], [`RankAction::EQUAL`] and
/// [`RankAction::BELOW`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RankAction(pub u8);

impl RankAction {
    pub const ABOVE: RankAction = RankAction(0);
    pub const EQUAL: RankAction = RankAction(1);
    pub const BELOW: RankAction = RankAction(2);

    pub fn is_tie(self) -> bool {
        self.0 % 2 == 1
    }

    /// Swap above and below (two-action placements only).
    pub fn flipped(self) -> RankAction {
        match self {
            RankAction::ABOVE => RankAction::BELOW,
            RankAction::BELOW => RankAction::ABOVE,
            other => other,
        }
    }
}

impl fmt::Display for RankAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            RankAction::ABOVE => write!(f, "above"),
            RankAction::EQUAL => write!(f, "equal"),
            RankAction::BELOW => write!(f, "below"),
            RankAction(k) => write!(f, "slot{k}"),
        }
    }
}

/// Two-action relation at one state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relation {
    /// Action 0 strictly preferred (Left in the dog garden).
    FirstStrict,
    /// Action 1 strictly preferred (Right in the dog garden).
    SecondStrict,
    Tie,
}

/// Per-state ordering of a whole Q-table.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PreferenceProfile(pub Vec<WeakOrder>);

impl PreferenceProfile {
    pub fn all_tied(n_states: usize, n_actions: usize) -> Self {
        PreferenceProfile(vec![WeakOrder::all_tied(n_actions); n_states])
    }

    pub fn from_relations(rel: &[Relation]) -> Self {
        PreferenceProfile(
            rel.iter()
                .map(|r| match r {
                    Relation::FirstStrict => WeakOrder(vec![0, 1]),
                    Relation::SecondStrict => WeakOrder(vec![1, 0]),
                    Relation::Tie => WeakOrder(vec![0, 0]),
                })
                .collect(),
        )
    }

    pub fn order(&self, s: StateId) -> &WeakOrder {
        &self.0[s.0]
    }

    /// Two-action relation at `s`; `None` for other action counts.
    pub fn relation(&self, s: StateId) -> Option<Relation> {
        match self.0[s.0].0.as_slice() {
            [0, 0] => Some(Relation::Tie),
            [0, 1] => Some(Relation::FirstStrict),
            [1, 0] => Some(Relation::SecondStrict),
            _ => None,
        }
    }

    pub fn n_states(&self) -> usize {
        self.0.len()
    }
}

/// Per-state orderings of `q`.
pub fn abstract_profile(q: &QTable) -> PreferenceProfile {
    PreferenceProfile((0..q.n_states()).map(|s| WeakOrder::of_row(q.row(StateId(s)))).collect())
}

/// Whether two tables order actions identically at every state.
pub fn order_equivalent(a: &QTable, b: &QTable) -> bool {
    a.same_shape(b) && abstract_profile(a) == abstract_profile(b)
}

/// All weak orders over `n_actions` actions, in a fixed order, with the
/// lookup from order to index.
#[derive(Debug, Clone)]
pub struct OrderCatalog {
    orders: Vec<WeakOrder>,
    index: HashMap<WeakOrder, usize>,
}

impl OrderCatalog {
    pub fn new(n_actions: usize) -> Self {
        let mut set = BTreeSet::new();
        let mut digits = vec![0usize; n_actions];
        loop {
            let row: Vec<f64> = digits.iter().map(|d| *d as f64).collect();
            set.insert(WeakOrder::of_row(&row));
            // odometer over {0..n}^n
            let mut i = 0;
            while i < n_actions {
                digits[i] += 1;
                if digits[i] < n_actions {
                    break;
                }
                digits[i] = 0;
                i += 1;
            }
            if i == n_actions {
                break;
            }
        }
        let orders: Vec<WeakOrder> = set.into_iter().collect();
        let index = orders.iter().cloned().enumerate().map(|(i, o)| (o, i)).collect();
        Self { orders, index }
    }

    pub fn len(&self) -> usize {
        self.orders.len()
    }

    pub fn is_empty(&self) -> bool {
        self.orders.is_empty()
    }

    pub fn get(&self, i: usize) -> &WeakOrder {
        &self.orders[i]
    }

    pub fn index_of(&self, o: &WeakOrder) -> Option<usize> {
        self.index.get(o).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = &WeakOrder> {
        self.orders.iter()
    }
}
