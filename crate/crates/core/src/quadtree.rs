//! Fixed-depth region quadtrees for interblock redundancy reduction.
//!
//! The engine is generic over the per-leaf payload: a bottom-up build
//! merges a square region into a single terminal whenever every leaf in
//! the region stays within a threshold of the region's representative
//! payload, so the per-leaf reconstruction error is bounded at every
//! level. Serialization is depth-first with one structure bit per node
//! except at the last level, whose nodes are always terminal and carry
//! no bit.

use crate::format::{BitReader, BitWriter, FormatError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node<P> {
    /// Children in TL, TR, BL, BR order.
    Split(Box<[Node<P>; 4]>),
    Terminal(P),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuadTree<P> {
    levels: u32,
    pub root: Node<P>,
}

/// Raster-ordered trees covering a full payload grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Forest<P> {
    pub trees: Vec<QuadTree<P>>,
    pub roots_across: usize,
    pub roots_down: usize,
    levels: u32,
    /// Pel side of one leaf block, kept for reporting.
    pub leaf_block_size: u32,
}

/// A terminal visited during traversal; coordinates are in leaf units
/// relative to the tree's own root region.
#[derive(Debug, Clone, Copy)]
pub struct TerminalVisit<'a, P> {
    pub level: u32,
    pub x0: usize,
    pub y0: usize,
    pub side: usize,
    pub payload: &'a P,
}

/// Per-level terminal counts and the leaf blocks they stand for.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LevelHistogram {
    pub counts: Vec<u64>,
    pub coverage: Vec<u64>,
}

impl<P> QuadTree<P> {
    /// Assembles a tree from a root built elsewhere; the caller is
    /// responsible for the depth invariant (no splits at the last level).
    pub fn from_parts(levels: u32, root: Node<P>) -> Self {
        Self { levels, root }
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    /// Leaf blocks per root region side: 2^(levels-1).
    pub fn side(&self) -> usize {
        1 << (self.levels - 1)
    }

    pub fn for_each_terminal<'a, F: FnMut(TerminalVisit<'a, P>)>(&'a self, mut f: F) {
        fn walk<'a, P, F: FnMut(TerminalVisit<'a, P>)>(
            node: &'a Node<P>,
            level: u32,
            x0: usize,
            y0: usize,
            side: usize,
            f: &mut F,
        ) {
            match node {
                Node::Terminal(payload) => f(TerminalVisit {
                    level,
                    x0,
                    y0,
                    side,
                    payload,
                }),
                Node::Split(children) => {
                    let half = side / 2;
                    walk(&children[0], level + 1, x0, y0, half, f);
                    walk(&children[1], level + 1, x0 + half, y0, half, f);
                    walk(&children[2], level + 1, x0, y0 + half, half, f);
                    walk(&children[3], level + 1, x0 + half, y0 + half, half, f);
                }
            }
        }
        walk(&self.root, 0, 0, 0, self.side(), &mut f);
    }

    pub fn node_count(&self) -> usize {
        fn count<P>(node: &Node<P>) -> usize {
            match node {
                Node::Terminal(_) => 1,
                Node::Split(children) => 1 + children.iter().map(count).sum::<usize>(),
            }
        }
        count(&self.root)
    }
}

/// Builds one tree over a `side` x `side` leaf grid (row-major). A region
/// becomes terminal when every leaf payload lies within `threshold` of the
/// region representative produced by `reduce`; the representative is then
/// the terminal payload. Nodes at the last level always terminate with
/// their own leaf payload.
///
/// `reduce` receives the region's leaves in row-major order, so tie-break
/// rules may key on the top-left leaf (index 0).
pub fn build_tree<P: Clone>(
    leaves: &[P],
    side: usize,
    reduce: &mut impl FnMut(&[P]) -> P,
    distance: &mut impl FnMut(&P, &P) -> f64,
    threshold: f64,
) -> QuadTree<P> {
    assert!(
        side.is_power_of_two(),
        "leaf grid side must be a power of two"
    );
    assert_eq!(leaves.len(), side * side, "malformed leaf grid");
    let levels = side.trailing_zeros() + 1;
    let root = build_node(
        leaves, side, 0, 0, side, levels, 0, reduce, distance, threshold,
    );
    QuadTree { levels, root }
}

#[allow(clippy::too_many_arguments)]
fn build_node<P: Clone>(
    leaves: &[P],
    grid_side: usize,
    x0: usize,
    y0: usize,
    side: usize,
    levels: u32,
    level: u32,
    reduce: &mut impl FnMut(&[P]) -> P,
    distance: &mut impl FnMut(&P, &P) -> f64,
    threshold: f64,
) -> Node<P> {
    if level == levels - 1 {
        return Node::Terminal(leaves[y0 * grid_side + x0].clone());
    }
    let region = region_leaves(leaves, grid_side, x0, y0, side);
    let rep = reduce(&region);
    if region.iter().all(|leaf| distance(leaf, &rep) <= threshold) {
        return Node::Terminal(rep);
    }
    let half = side / 2;
    let mut child = |cx: usize, cy: usize| {
        build_node(
            leaves,
            grid_side,
            cx,
            cy,
            half,
            levels,
            level + 1,
            reduce,
            distance,
            threshold,
        )
    };
    Node::Split(Box::new([
        child(x0, y0),
        child(x0 + half, y0),
        child(x0, y0 + half),
        child(x0 + half, y0 + half),
    ]))
}

fn region_leaves<P: Clone>(
    leaves: &[P],
    grid_side: usize,
    x0: usize,
    y0: usize,
    side: usize,
) -> Vec<P> {
    let mut region = Vec::with_capacity(side * side);
    for y in y0..y0 + side {
        region.extend_from_slice(&leaves[y * grid_side + x0..y * grid_side + x0 + side]);
    }
    region
}

/// Replicates every terminal payload over the leaf positions it covers.
pub fn expand_tree<P: Clone>(tree: &QuadTree<P>) -> Vec<P> {
    let side = tree.side();
    let mut grid: Vec<Option<P>> = vec![None; side * side];
    tree.for_each_terminal(|t| {
        for y in t.y0..t.y0 + t.side {
            for x in t.x0..t.x0 + t.side {
                grid[y * side + x] = Some(t.payload.clone());
            }
        }
    });
    grid.into_iter()
        .map(|p| p.expect("terminals cover every leaf"))
        .collect()
}

/// Depth-first preorder: levels 0..L-2 emit one structure bit per node
/// (1 split, 0 terminal); last-level nodes emit none. Terminal payload
/// bits follow the node's position immediately.
pub fn serialize_tree<P>(
    tree: &QuadTree<P>,
    w: &mut BitWriter,
    payload_bits: &mut impl FnMut(&mut BitWriter, &P),
) {
    fn walk<P>(
        node: &Node<P>,
        level: u32,
        levels: u32,
        w: &mut BitWriter,
        payload_bits: &mut impl FnMut(&mut BitWriter, &P),
    ) {
        let last_level = level == levels - 1;
        match node {
            Node::Terminal(payload) => {
                if !last_level {
                    w.append_bit(false);
                }
                payload_bits(w, payload);
            }
            Node::Split(children) => {
                assert!(!last_level, "last-level nodes are always terminal");
                w.append_bit(true);
                for child in children.iter() {
                    walk(child, level + 1, levels, w, payload_bits);
                }
            }
        }
    }
    walk(&tree.root, 0, tree.levels, w, payload_bits);
}

pub fn deserialize_tree<P>(
    r: &mut BitReader<'_>,
    levels: u32,
    payload_read: &mut impl FnMut(&mut BitReader<'_>) -> Result<P, FormatError>,
) -> Result<QuadTree<P>, FormatError> {
    fn read_node<P>(
        r: &mut BitReader<'_>,
        level: u32,
        levels: u32,
        payload_read: &mut impl FnMut(&mut BitReader<'_>) -> Result<P, FormatError>,
    ) -> Result<Node<P>, FormatError> {
        let split = if level == levels - 1 {
            false
        } else {
            r.read_bit()?
        };
        if split {
            let tl = read_node(r, level + 1, levels, payload_read)?;
            let tr = read_node(r, level + 1, levels, payload_read)?;
            let bl = read_node(r, level + 1, levels, payload_read)?;
            let br = read_node(r, level + 1, levels, payload_read)?;
            Ok(Node::Split(Box::new([tl, tr, bl, br])))
        } else {
            Ok(Node::Terminal(payload_read(r)?))
        }
    }
    Ok(QuadTree {
        levels,
        root: read_node(r, 0, levels, payload_read)?,
    })
}

// ---------------------------------------------------------------------------
// Forests

/// Builds raster-ordered trees over a full `across` x `down` payload grid.
/// Both dimensions must be multiples of the root region side 2^(levels-1);
/// padding guarantees this for every pipeline.
#[allow(clippy::too_many_arguments)]
pub fn build_forest<P: Clone>(
    grid: &[P],
    across: usize,
    down: usize,
    levels: u32,
    leaf_block_size: u32,
    reduce: &mut impl FnMut(&[P]) -> P,
    distance: &mut impl FnMut(&P, &P) -> f64,
    threshold: f64,
) -> Forest<P> {
    assert_eq!(grid.len(), across * down, "malformed payload grid");
    let side = 1usize << (levels - 1);
    assert!(
        across.is_multiple_of(side) && down.is_multiple_of(side),
        "grid must tile into root regions"
    );
    let roots_across = across / side;
    let roots_down = down / side;
    let mut trees = Vec::with_capacity(roots_across * roots_down);
    for ry in 0..roots_down {
        for rx in 0..roots_across {
            let region = region_leaves(grid, across, rx * side, ry * side, side);
            trees.push(build_tree(&region, side, reduce, distance, threshold));
        }
    }
    Forest {
        trees,
        roots_across,
        roots_down,
        levels,
        leaf_block_size,
    }
}

impl<P> Forest<P> {
    pub fn from_trees(
        trees: Vec<QuadTree<P>>,
        roots_across: usize,
        roots_down: usize,
        levels: u32,
        leaf_block_size: u32,
    ) -> Self {
        assert_eq!(trees.len(), roots_across * roots_down);
        Self {
            trees,
            roots_across,
            roots_down,
            levels,
            leaf_block_size,
        }
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    /// Leaf blocks per root region side.
    pub fn root_side(&self) -> usize {
        1 << (self.levels - 1)
    }

    /// Pel side of one root region.
    pub fn root_region_size(&self) -> u32 {
        self.leaf_block_size << (self.levels - 1)
    }

    pub fn leaf_blocks_across(&self) -> usize {
        self.roots_across * self.root_side()
    }

    pub fn leaf_blocks_down(&self) -> usize {
        self.roots_down * self.root_side()
    }

    pub fn total_leaf_blocks(&self) -> usize {
        self.leaf_blocks_across() * self.leaf_blocks_down()
    }

    /// Terminal counts per level and the equivalent leaf-block coverage
    /// (a terminal at level l stands for 4^(L-1-l) leaf blocks).
    pub fn level_histogram(&self) -> LevelHistogram {
        let mut counts = vec![0u64; self.levels as usize];
        for tree in &self.trees {
            tree.for_each_terminal(|t| counts[t.level as usize] += 1);
        }
        let coverage = counts
            .iter()
            .enumerate()
            .map(|(level, &c)| c * 4u64.pow(self.levels - 1 - level as u32))
            .collect();
        LevelHistogram { counts, coverage }
    }
}

impl<P: Clone> Forest<P> {
    /// Reconstructs the full payload grid, row-major.
    pub fn expand(&self) -> Vec<P> {
        let side = self.root_side();
        let across = self.leaf_blocks_across();
        let down = self.leaf_blocks_down();
        let mut grid: Vec<Option<P>> = vec![None; across * down];
        for (i, tree) in self.trees.iter().enumerate() {
            let rx = (i % self.roots_across) * side;
            let ry = (i / self.roots_across) * side;
            let expanded = expand_tree(tree);
            for y in 0..side {
                for x in 0..side {
                    grid[(ry + y) * across + rx + x] = Some(expanded[y * side + x].clone());
                }
            }
        }
        grid.into_iter()
            .map(|p| p.expect("trees cover the grid"))
            .collect()
    }
}

pub fn serialize_forest<P>(
    forest: &Forest<P>,
    w: &mut BitWriter,
    payload_bits: &mut impl FnMut(&mut BitWriter, &P),
) {
    for tree in &forest.trees {
        serialize_tree(tree, w, payload_bits);
    }
}

pub fn deserialize_forest<P>(
    r: &mut BitReader<'_>,
    roots_across: usize,
    roots_down: usize,
    levels: u32,
    leaf_block_size: u32,
    payload_read: &mut impl FnMut(&mut BitReader<'_>) -> Result<P, FormatError>,
) -> Result<Forest<P>, FormatError> {
    let mut trees = Vec::with_capacity(roots_across * roots_down);
    for _ in 0..roots_across * roots_down {
        trees.push(deserialize_tree(r, levels, payload_read)?);
    }
    Ok(Forest {
        trees,
        roots_across,
        roots_down,
        levels,
        leaf_block_size,
    })
}

// ---------------------------------------------------------------------------
// Payload criteria for the BTC pipelines

/// Region representative for grey levels: arithmetic mean, rounded half-up.
pub fn grey_reduce(values: &[u8]) -> u8 {
    let sum: u32 = values.iter().map(|&v| v as u32).sum();
    let n = values.len() as u32;
    ((sum + n / 2) / n) as u8
}

pub fn grey_distance(x: u8, y: u8) -> f64 {
    (x as i32 - y as i32).abs() as f64
}

/// Region representative for bit planes: per-bit majority vote. An exact
/// tie takes the top-left leaf's bit.
pub fn plane_reduce(planes: &[u16]) -> u16 {
    majority_bits(
        planes.iter().map(|&p| p as u32),
        planes.len(),
        planes[0] as u32,
        16,
    ) as u16
}

pub fn plane_distance(p: u16, q: u16) -> f64 {
    (p ^ q).count_ones() as f64
}

pub(crate) fn majority_bits(
    planes: impl Iterator<Item = u32> + Clone,
    count: usize,
    tie_break: u32,
    width: u32,
) -> u32 {
    let mut out = 0u32;
    for bit in 0..width {
        let ones = planes.clone().filter(|p| (p >> bit) & 1 == 1).count() * 2;
        let set = match ones.cmp(&count) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => (tie_break >> bit) & 1 == 1,
        };
        if set {
            out |= 1 << bit;
        }
    }
    out
}
