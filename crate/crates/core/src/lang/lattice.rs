use std::fmt;

use serde::Serialize;

use crate::{Error, Result};

/// Index of a level inside its [`Lattice`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct LevelId(pub u16);

/// A finite security lattice given by level names and Hasse pairs.
///
/// Order, joins and meets are tabulated at construction time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    names: Vec<String>,
    leq: Vec<Vec<bool>>,
    join: Vec<Vec<LevelId>>,
    meet: Vec<Vec<LevelId>>,
    bottom: LevelId,
    top: LevelId,
}

impl Lattice {
    /// Builds the lattice whose order is the reflexive-transitive closure of
    /// `below` (pairs `(a, b)` meaning `a < b`).
    pub fn new<S: AsRef<str>>(levels: &[S], below: &[(S, S)]) -> Result<Lattice> {
        let names: Vec<String> = levels.iter().map(|s| s.as_ref().to_string()).collect();
        if names.is_empty() {
            return Err(Error::Lattice("no levels declared".into()));
        }
        if names.len() > u16::MAX as usize {
            return Err(Error::Lattice("too many levels".into()));
        }
        for (i, n) in names.iter().enumerate() {
            if names[..i].contains(n) {
                return Err(Error::Lattice(format!("level `{n}` declared twice")));
            }
        }
        let index = |s: &str| {
            names
                .iter()
                .position(|n| n == s)
                .ok_or_else(|| Error::UnknownLevel(s.to_string()))
        };
        let n = names.len();
        let mut leq = vec![vec![false; n]; n];
        for (i, row) in leq.iter_mut().enumerate() {
            row[i] = true;
        }
        for (a, b) in below {
            let (a, b) = (index(a.as_ref())?, index(b.as_ref())?);
            leq[a][b] = true;
        }
        // Warshall closure.
        for k in 0..n {
            for i in 0..n {
                if leq[i][k] {
                    for j in 0..n {
                        if leq[k][j] {
                            leq[i][j] = true;
                        }
                    }
                }
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if leq[i][j] && leq[j][i] {
                    return Err(Error::Lattice(format!(
                        "order is cyclic: `{}` and `{}` are below each other",
                        names[i], names[j]
                    )));
                }
            }
        }

        let bound = |i: usize, j: usize, upper: bool| -> Result<LevelId> {
            let candidates: Vec<usize> = (0..n)
                .filter(|&k| if upper { leq[i][k] && leq[j][k] } else { leq[k][i] && leq[k][j] })
                .collect();
            let best = candidates.iter().copied().find(|&k| {
                candidates.iter().all(|&c| if upper { leq[k][c] } else { leq[c][k] })
            });
            best.map(|k| LevelId(k as u16)).ok_or_else(|| {
                Error::Lattice(format!(
                    "`{}` and `{}` have no {}",
                    names[i],
                    names[j],
                    if upper { "join" } else { "meet" }
                ))
            })
        };
        let mut join = vec![vec![LevelId(0); n]; n];
        let mut meet = vec![vec![LevelId(0); n]; n];
        for i in 0..n {
            for j in 0..n {
                join[i][j] = bound(i, j, true)?;
                meet[i][j] = bound(i, j, false)?;
            }
        }
        let bottom = (1..n).fold(LevelId(0), |acc, k| meet[acc.0 as usize][k]);
        let top = (1..n).fold(LevelId(0), |acc, k| join[acc.0 as usize][k]);
        Ok(Lattice { names, leq, join, meet, bottom, top })
    }

    /// The lattice `L < H`.
    pub fn two_point() -> Lattice {
        Lattice::new(&["L", "H"], &[("L", "H")]).expect("two-point lattice is valid")
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn levels(&self) -> impl Iterator<Item = LevelId> {
        (0..self.names.len() as u16).map(LevelId)
    }

    pub fn level(&self, name: &str) -> Result<LevelId> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| LevelId(i as u16))
            .ok_or_else(|| Error::UnknownLevel(name.to_string()))
    }

    pub fn name(&self, l: LevelId) -> &str {
        &self.names[l.0 as usize]
    }

    pub fn leq(&self, a: LevelId, b: LevelId) -> bool {
        self.leq[a.0 as usize][b.0 as usize]
    }

    pub fn join(&self, a: LevelId, b: LevelId) -> LevelId {
        self.join[a.0 as usize][b.0 as usize]
    }

    pub fn meet(&self, a: LevelId, b: LevelId) -> LevelId {
        self.meet[a.0 as usize][b.0 as usize]
    }

    pub fn bottom(&self) -> LevelId {
        self.bottom
    }

    pub fn top(&self) -> LevelId {
        self.top
    }

    /// Length of the longest strict chain, counted in edges.
    pub fn height(&self) -> usize {
        let n = self.len();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| (0..n).filter(|&k| self.leq[k][i]).count());
        let mut depth = vec![0usize; n];
        for &i in &order {
            for &k in &order {
                if k != i && self.leq[k][i] {
                    depth[i] = depth[i].max(depth[k] + 1);
                }
            }
        }
        depth.into_iter().max().unwrap_or(0)
    }

    /// Hasse pairs (covering relation) of the order.
    pub fn covers(&self) -> Vec<(LevelId, LevelId)> {
        let mut out = Vec::new();
        for a in self.levels() {
            for b in self.levels() {
                if a != b && self.leq(a, b) {
                    let between = self
                        .levels()
                        .any(|c| c != a && c != b && self.leq(a, c) && self.leq(c, b));
                    if !between {
                        out.push((a, b));
                    }
                }
            }
        }
        out
    }
}

impl fmt::Display for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "levels: {};", self.names.join(" "))?;
        let covers = self.covers();
        if !covers.is_empty() {
            f.write_str("\norder:")?;
            for (a, b) in covers {
                write!(f, " {} < {};", self.name(a), self.name(b))?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diamond() -> Lattice {
        Lattice::new(
            &["bot", "A", "B", "top"],
            &[("bot", "A"), ("bot", "B"), ("A", "top"), ("B", "top")],
        )
        .unwrap()
    }

    #[test]
    fn two_point_ops() {
        let lat = Lattice::two_point();
        let (l, h) = (lat.level("L").unwrap(), lat.level("H").unwrap());
        assert!(lat.leq(l, h));
        assert!(!lat.leq(h, l));
        assert_eq!(lat.join(l, h), h);
        assert_eq!(lat.meet(l, h), l);
        assert!(lat.leq(h, h));
        assert_eq!(lat.join(h, h), h);
        assert_eq!(lat.meet(h, h), h);
        assert_eq!((lat.bottom(), lat.top()), (l, h));
        assert_eq!(lat.height(), 1);
    }

    #[test]
    fn diamond_incomparable_pair() {
        let lat = diamond();
        let id = |s| lat.level(s).unwrap();
        assert!(!lat.leq(id("A"), id("B")));
        assert_eq!(lat.join(id("A"), id("B")), id("top"));
        assert_eq!(lat.meet(id("A"), id("B")), id("bot"));
        assert_eq!(lat.height(), 2);
    }

    #[test]
    fn one_point() {
        let lat = Lattice::new(&["A"], &[]).unwrap();
        assert_eq!(lat.bottom(), lat.top());
    }

    #[test]
    fn antichain_is_rejected() {
        let err = Lattice::new(&["A", "B"], &[]).unwrap_err();
        assert!(err.to_string().contains("`A` and `B` have no join"), "{err}");
    }

    #[test]
    fn two_maximal_uppers_is_rejected() {
        // a, b < c, d with c, d incomparable: no least upper bound.
        let err = Lattice::new(
            &["bot", "a", "b", "c", "d", "top"],
            &[
                ("bot", "a"),
                ("bot", "b"),
                ("a", "c"),
                ("a", "d"),
                ("b", "c"),
                ("b", "d"),
                ("c", "top"),
                ("d", "top"),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Lattice(_)));
    }

    #[test]
    fn cycles_and_unknown_levels() {
        assert!(Lattice::new(&["A", "B"], &[("A", "B"), ("B", "A")]).is_err());
        assert_eq!(
            Lattice::new(&["A"], &[("A", "Z")]).unwrap_err(),
            Error::UnknownLevel("Z".into())
        );
    }
}
