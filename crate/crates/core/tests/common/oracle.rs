//! Finite-horizon expectimax on the dog garden, written from scratch with no
//! help from the solver: hand-coded moves, per-tile relations as a tiny enum,
//! plain recursion with a memo.

use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pref {
    Left,
    Right,
    Tie,
}

pub const TILES: usize = 4;
pub type Prefs = [Pref; TILES];

/// Moves: `(next tile, probability)` for `Left`/`Right` at `tile`. Walking
/// right off tile 3 goes through the door and back to tile 3.
fn moves(tile: usize, right: bool) -> usize {
    if right {
        if tile == TILES - 1 {
            TILES - 1
        } else {
            tile + 1
        }
    } else {
        tile.saturating_sub(1)
    }
}

fn done(p: &Prefs) -> bool {
    p.iter().all(|x| *x == Pref::Right)
}

pub struct Expectimax {
    eps: f64,
    memo: HashMap<(usize, usize, Prefs), f64>,
}

impl Expectimax {
    pub fn new(eps: f64) -> Self {
        Self { eps, memo: HashMap::new() }
    }

    /// Expected steps with at most `h` steps to go (the remaining tail counts zero).
    pub fn value(&mut self, h: usize, tile: usize, p: Prefs) -> f64 {
        if done(&p) || h == 0 {
            return 0.0;
        }
        if let Some(v) = self.memo.get(&(h, tile, p)) {
            return *v;
        }
        let (p_left, p_right) = match p[tile] {
            Pref::Tie => (0.5, 0.5),
            Pref::Left => (1.0 - self.eps / 2.0, self.eps / 2.0),
            Pref::Right => (self.eps / 2.0, 1.0 - self.eps / 2.0),
        };
        let mut total = 1.0;
        for (prob, right) in [(p_left, false), (p_right, true)] {
            if prob == 0.0 {
                continue;
            }
            let next = moves(tile, right);
            let best = [Pref::Left, Pref::Right, Pref::Tie]
                .into_iter()
                .map(|new| {
                    let mut q = p;
                    q[tile] = new;
                    if done(&q) {
                        0.0
                    } else {
                        self.value(h - 1, next, q)
                    }
                })
                .fold(f64::INFINITY, f64::min);
            total += prob * best;
        }
        self.memo.insert((h, tile, p), total);
        total
    }
}

pub fn all_prefs() -> Vec<Prefs> {
    let opts = [Pref::Left, Pref::Right, Pref::Tie];
    let mut out = Vec::new();
    for a in opts {
        for b in opts {
            for c in opts {
                for d in opts {
                    out.push([a, b, c, d]);
                }
            }
        }
    }
    out
}
