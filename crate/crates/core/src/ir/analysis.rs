//! Control-flow analyses: reverse post-order, dominators
//! (Cooper, Harvey & Kennedy), and natural loops.

use std::collections::{BTreeSet, HashMap};

use super::types::*;

pub struct Cfg {
    /// Reachable blocks in reverse post-order; the entry comes first.
    pub rpo: Vec<BlockId>,
    pub preds: HashMap<BlockId, Vec<BlockId>>,
    pub succs: HashMap<BlockId, Vec<BlockId>>,
    /// Immediate dominators of reachable blocks (the entry maps to itself).
    pub idom: HashMap<BlockId, BlockId>,
    order: HashMap<BlockId, usize>,
}

impl Cfg {
    pub fn new(f: &Function) -> Cfg {
        let succs: HashMap<BlockId, Vec<BlockId>> = f.blocks.iter().map(|b| (b.id, b.successors())).collect();
        let preds = f.predecessors();
        let rpo = match f.blocks.first() {
            Some(entry) => reverse_post_order(entry.id, &succs),
            None => Vec::new(),
        };
        let order: HashMap<BlockId, usize> = rpo.iter().enumerate().map(|(i, b)| (*b, i)).collect();
        let mut cfg = Cfg { rpo, preds, succs, idom: HashMap::new(), order };
        cfg.compute_dominators();
        cfg
    }

    pub fn is_reachable(&self, b: BlockId) -> bool {
        self.order.contains_key(&b)
    }

    fn compute_dominators(&mut self) {
        let Some(&entry) = self.rpo.first() else { return };
        let mut idom: HashMap<BlockId, BlockId> = HashMap::from([(entry, entry)]);
        let mut changed = true;
        while changed {
            changed = false;
            for &b in self.rpo.iter().skip(1) {
                let mut new_idom: Option<BlockId> = None;
                for p in &self.preds[&b] {
                    if !idom.contains_key(p) {
                        continue;
                    }
                    new_idom = Some(match new_idom {
                        None => *p,
                        Some(cur) => self.intersect(&idom, *p, cur),
                    });
                }
                if let Some(n) = new_idom {
                    if idom.get(&b) != Some(&n) {
                        idom.insert(b, n);
                        changed = true;
                    }
                }
            }
        }
        self.idom = idom;
    }

    fn intersect(&self, idom: &HashMap<BlockId, BlockId>, mut a: BlockId, mut b: BlockId) -> BlockId {
        while a != b {
            while self.order[&a] > self.order[&b] {
                a = idom[&a];
            }
            while self.order[&b] > self.order[&a] {
                b = idom[&b];
            }
        }
        a
    }

    /// Block dominance; unreachable blocks dominate nothing and are
    /// dominated by everything.
    pub fn dominates(&self, a: BlockId, b: BlockId) -> bool {
        if !self.is_reachable(b) {
            return true;
        }
        if !self.is_reachable(a) {
            return false;
        }
        let mut cur = b;
        loop {
            if cur == a {
                return true;
            }
            let up = self.idom[&cur];
            if up == cur {
                return false;
            }
            cur = up;
        }
    }

    /// Natural loops, one per header (back edges sharing a header are merged),
    /// ordered by header position in reverse post-order.
    pub fn natural_loops(&self) -> Vec<Loop> {
        let mut by_header: HashMap<BlockId, Vec<BlockId>> = HashMap::new();
        for &b in &self.rpo {
            for &s in &self.succs[&b] {
                if self.is_reachable(s) && self.dominates(s, b) {
                    by_header.entry(s).or_default().push(b);
                }
            }
        }
        let mut loops: Vec<Loop> = by_header
            .into_iter()
            .map(|(header, latches)| {
                let mut body = BTreeSet::from([header]);
                let mut stack: Vec<BlockId> = latches.clone();
                while let Some(b) = stack.pop() {
                    if body.insert(b) {
                        stack.extend(self.preds[&b].iter().filter(|p| self.is_reachable(**p)));
                    }
                }
                Loop { header, latches, body }
            })
            .collect();
        loops.sort_by_key(|l| self.order[&l.header]);
        loops
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Loop {
    pub header: BlockId,
    pub latches: Vec<BlockId>,
    pub body: BTreeSet<BlockId>,
}

fn reverse_post_order(entry: BlockId, succs: &HashMap<BlockId, Vec<BlockId>>) -> Vec<BlockId> {
    let mut post = Vec::new();
    let mut visited = BTreeSet::from([entry]);
    // Iterative DFS: (block, next successor index).
    let mut stack = vec![(entry, 0usize)];
    while let Some((b, i)) = stack.pop() {
        let ss = succs.get(&b).map(Vec::as_slice).unwrap_or(&[]);
        if i < ss.len() {
            stack.push((b, i + 1));
            let s = ss[i];
            if succs.contains_key(&s) && visited.insert(s) {
                stack.push((s, 0));
            }
        } else {
            post.push(b);
        }
    }
    post.reverse();
    post
}

/// Block of each defined value.
pub fn def_blocks(f: &Function) -> HashMap<ValueId, BlockId> {
    let mut m = HashMap::new();
    for b in &f.blocks {
        for i in &b.insts {
            m.insert(i.id, b.id);
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::text::parse_module;

    #[test]
    fn diamond_and_loop() {
        let m = parse_module(
            "define void @llvm_main() {
bb0:
  br i1 true, bb1, bb2
bb1:
  br bb3
bb2:
  br bb3
bb3:
  br i1 false, bb3, bb4
bb4:
  ret void
bb9:
  br bb4
}
",
        )
        .unwrap();
        let cfg = Cfg::new(&m.functions[0]);
        assert_eq!(cfg.idom[&BlockId(3)], BlockId(0));
        assert!(cfg.dominates(BlockId(0), BlockId(4)));
        assert!(!cfg.dominates(BlockId(1), BlockId(3)));
        assert!(!cfg.is_reachable(BlockId(9)));
        let loops = cfg.natural_loops();
        assert_eq!(loops.len(), 1);
        assert_eq!(loops[0].header, BlockId(3));
        assert_eq!(loops[0].body.len(), 1);
    }
}
