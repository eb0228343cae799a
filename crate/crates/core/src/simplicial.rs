//! Abstract simplicial complexes and their boundary matrices over F2.
//!
//! Everything here is exact and combinatorial: the coefficient field is
//! fixed to F2, so a column of a boundary matrix is just the sorted set of
//! its nonzero row indices and column addition is symmetric difference.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::fmt;

use crate::error::{Result, TopoError};

/// A simplex given by its strictly increasing vertex indices.
///
/// Simplices order by dimension first and lexicographically within a
/// dimension, which is the face-respecting order used for boundary matrices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Simplex(Vec<usize>);

impl Simplex {
    /// Builds a simplex from vertices in any order.
    pub fn new(mut vertices: Vec<usize>) -> Result<Self> {
        if vertices.is_empty() {
            return Err(TopoError::InvalidSimplex {
                vertices,
                reason: "a simplex needs at least one vertex",
            });
        }
        let original = vertices.clone();
        vertices.sort_unstable();
        if vertices.windows(2).any(|w| w[0] == w[1]) {
            return Err(TopoError::InvalidSimplex {
                vertices: original,
                reason: "duplicate vertex",
            });
        }
        Ok(Simplex(vertices))
    }

    /// Wraps vertices that the caller guarantees are sorted and distinct.
    pub(crate) fn from_sorted(vertices: Vec<usize>) -> Self {
        debug_assert!(!vertices.is_empty());
        debug_assert!(vertices.windows(2).all(|w| w[0] < w[1]));
        Simplex(vertices)
    }

    pub fn vertex(v: usize) -> Self {
        Simplex(vec![v])
    }

    pub fn edge(a: usize, b: usize) -> Self {
        if a < b {
            Simplex(vec![a, b])
        } else {
            Simplex(vec![b, a])
        }
    }

    pub fn vertices(&self) -> &[usize] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len() - 1
    }

    /// The codimension-1 faces, each obtained by dropping one vertex.
    pub fn facets(&self) -> impl Iterator<Item = Simplex> + '_ {
        let len = if self.0.len() > 1 { self.0.len() } else { 0 };
        (0..len).map(move |skip| {
            Simplex(
                self.0
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != skip)
                    .map(|(_, &v)| v)
                    .collect(),
            )
        })
    }

    /// Every nonempty subset of the vertex set, including the simplex itself.
    pub fn all_faces(&self) -> Vec<Simplex> {
        let k = self.0.len();
        (1u64..(1u64 << k))
            .map(|mask| Simplex((0..k).filter(|i| mask & (1 << i) != 0).map(|i| self.0[i]).collect()))
            .collect()
    }
}

impl Ord for Simplex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.len().cmp(&other.0.len()).then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Simplex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Simplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, "}}")
    }
}

/// A set of simplices closed under taking faces.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SimplicialComplex {
    simplices: BTreeSet<Simplex>,
}

impl SimplicialComplex {
    /// Iterates simplices in dimension-then-lexicographic order.
    pub fn simplices(&self) -> impl Iterator<Item = &Simplex> {
        self.simplices.iter()
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn contains(&self, s: &Simplex) -> bool {
        self.simplices.contains(s)
    }

    pub fn max_dim(&self) -> Option<usize> {
        self.simplices.iter().next_back().map(Simplex::dim)
    }

    /// Number of simplices in each dimension `0..=max_dim`.
    pub fn counts_by_dim(&self) -> Vec<usize> {
        let mut counts = vec![0; self.max_dim().map_or(0, |d| d + 1)];
        for s in &self.simplices {
            counts[s.dim()] += 1;
        }
        counts
    }

    /// The simplices in the canonical order, as an owned list.
    pub fn ordered(&self) -> Vec<Simplex> {
        self.simplices.iter().cloned().collect()
    }

    /// Inserts simplices without checking closure.
    pub(crate) fn from_closed_set(simplices: BTreeSet<Simplex>) -> Self {
        SimplicialComplex { simplices }
    }
}

/// The smallest simplicial complex containing every generator.
pub fn close_complex<I>(generators: I) -> Result<SimplicialComplex>
where
    I: IntoIterator<Item = Vec<usize>>,
{
    let mut simplices = BTreeSet::new();
    for vertices in generators {
        let s = Simplex::new(vertices)?;
        if simplices.contains(&s) {
            continue;
        }
        simplices.extend(s.all_faces());
    }
    Ok(SimplicialComplex { simplices })
}

/// Full boundary matrix over F2. Columns hold sorted row indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryMatrix {
    columns: Vec<Vec<usize>>,
    dims: Vec<usize>,
}

impl BoundaryMatrix {
    /// Builds the matrix for simplices listed in a face-before-coface order.
    pub fn from_ordered(order: &[Simplex]) -> Result<Self> {
        let index: HashMap<&Simplex, usize> = order.iter().enumerate().map(|(i, s)| (s, i)).collect();
        if index.len() != order.len() {
            return Err(TopoError::Ordering("simplex listed twice".into()));
        }
        let mut columns = Vec::with_capacity(order.len());
        let mut dims = Vec::with_capacity(order.len());
        for (j, s) in order.iter().enumerate() {
            let mut col = Vec::with_capacity(s.dim() + 1);
            for facet in s.facets() {
                match index.get(&facet) {
                    Some(&i) if i < j => col.push(i),
                    Some(_) => {
                        return Err(TopoError::Ordering(format!(
                            "face {facet} appears after its coface {s}"
                        )))
                    }
                    None => return Err(TopoError::Ordering(format!("face {facet} of {s} is missing"))),
                }
            }
            col.sort_unstable();
            columns.push(col);
            dims.push(s.dim());
        }
        Ok(BoundaryMatrix { columns, dims })
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn column(&self, j: usize) -> &[usize] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<usize>] {
        &self.columns
    }

    pub fn dim_of(&self, j: usize) -> usize {
        self.dims[j]
    }

    /// Dense 0/1 entry lookup, mostly for tests and small examples.
    pub fn entry(&self, row: usize, col: usize) -> bool {
        self.columns[col].binary_search(&row).is_ok()
    }

    /// Column indices of the `k`-dimensional simplices.
    pub fn columns_of_dim(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        self.dims
            .iter()
            .enumerate()
            .filter(move |&(_, &d)| d == k)
            .map(|(j, _)| j)
    }
}

/// Boundary matrix of `complex` with rows and columns in `order`.
///
/// `order` must list exactly the simplices of the complex with every face
/// placed before each of its cofaces.
pub fn boundary_matrix(complex: &SimplicialComplex, order: &[Simplex]) -> Result<BoundaryMatrix> {
    if order.len() != complex.len() || order.iter().any(|s| !complex.contains(s)) {
        return Err(TopoError::Ordering("order is not a permutation of the complex".into()));
    }
    BoundaryMatrix::from_ordered(order)
}

/// `target += source` over F2 for sorted sparse columns.
pub(crate) fn add_column(target: &mut Vec<usize>, source: &[usize]) {
    let mut out = Vec::with_capacity(target.len() + source.len());
    let (mut i, mut j) = (0, 0);
    while i < target.len() && j < source.len() {
        match target[i].cmp(&source[j]) {
            Ordering::Less => {
                out.push(target[i]);
                i += 1;
            }
            Ordering::Greater => {
                out.push(source[j]);
                j += 1;
            }
            Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&target[i..]);
    out.extend_from_slice(&source[j..]);
    *target = out;
}

/// Rank over F2 of the block of `matrix` holding the `k`-dimensional columns.
pub fn rank_f2(matrix: &BoundaryMatrix, k: usize) -> usize {
    let mut pivots: HashMap<usize, Vec<usize>> = HashMap::new();
    for j in matrix.columns_of_dim(k) {
        let mut col = matrix.column(j).to_vec();
        while let Some(&low) = col.last() {
            match pivots.get(&low) {
                Some(other) => add_column(&mut col, other),
                None => {
                    pivots.insert(low, col);
                    break;
                }
            }
        }
    }
    pivots.len()
}

/// Betti numbers `β_0..=β_max_dim` via rank-nullity on the boundary blocks.
pub fn betti_numbers(complex: &SimplicialComplex, max_dim: usize) -> Vec<usize> {
    let order = complex.ordered();
    let matrix = BoundaryMatrix::from_ordered(&order).expect("closed complexes are face-ordered");
    let counts = complex.counts_by_dim();
    let count = |k: usize| counts.get(k).copied().unwrap_or(0);
    let ranks: Vec<usize> = (0..=max_dim + 1)
        .map(|k| if k == 0 { 0 } else { rank_f2(&matrix, k) })
        .collect();
    (0..=max_dim).map(|k| count(k) - ranks[k] - ranks[k + 1]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn figure_complex() -> SimplicialComplex {
        close_complex(vec![vec![0, 1, 2], vec![1, 3, 4], vec![2, 4, 5]]).unwrap()
    }

    fn label(s: &Simplex) -> String {
        s.vertices().iter().map(|v| v.to_string()).collect()
    }

    #[test]
    fn closure_of_triangle() {
        let c = close_complex(vec![vec![2, 0, 1]]).unwrap();
        assert_eq!(c.len(), 7);
        assert_eq!(c.counts_by_dim(), vec![3, 3, 1]);
    }

    #[test]
    fn vertices_are_closed() {
        let c = close_complex(vec![vec![0], vec![1]]).unwrap();
        assert_eq!(c.len(), 2);
    }

    #[test]
    fn duplicate_vertex_rejected() {
        assert!(matches!(
            close_complex(vec![vec![0, 1, 1]]),
            Err(TopoError::InvalidSimplex { .. })
        ));
        assert!(Simplex::new(vec![]).is_err());
    }

    #[test]
    fn figure_complex_labels() {
        let c = figure_complex();
        let labels: Vec<String> = c.simplices().map(label).collect();
        assert_eq!(
            labels,
            vec![
                "0", "1", "2", "3", "4", "5", "01", "02", "12", "13", "14", "24", "25", "34", "45", "012", "134", "245"
            ]
        );
    }

    #[test]
    fn figure_boundary_columns() {
        let c = figure_complex();
        let order = c.ordered();
        let b = boundary_matrix(&c, &order).unwrap();
        assert_eq!(b.len(), 18);
        // x01 has rows x0, x1
        assert_eq!(b.column(6), &[0, 1]);
        // x245 has rows x24, x25, x45
        assert_eq!(b.column(17), &[11, 12, 14]);
        for j in 0..6 {
            assert!(b.column(j).is_empty());
        }
        for j in 0..b.len() {
            let d = b.dim_of(j);
            assert_eq!(b.column(j).len(), if d == 0 { 0 } else { d + 1 });
        }
    }

    #[test]
    fn single_vertex_and_edge() {
        let c = close_complex(vec![vec![0]]).unwrap();
        let b = boundary_matrix(&c, &c.ordered()).unwrap();
        assert_eq!(b.len(), 1);
        assert!(!b.entry(0, 0));

        let c = close_complex(vec![vec![0, 1]]).unwrap();
        let b = boundary_matrix(&c, &c.ordered()).unwrap();
        assert_eq!(b.column(2), &[0, 1]);
    }

    #[test]
    fn coface_before_face_is_rejected() {
        let c = close_complex(vec![vec![0, 1]]).unwrap();
        let order = vec![Simplex::vertex(0), Simplex::edge(0, 1), Simplex::vertex(1)];
        assert!(matches!(boundary_matrix(&c, &order), Err(TopoError::Ordering(_))));
    }

    #[test]
    fn figure_ranks_and_betti() {
        let c = figure_complex();
        let b = boundary_matrix(&c, &c.ordered()).unwrap();
        assert_eq!(rank_f2(&b, 0), 0);
        assert_eq!(rank_f2(&b, 1), 5);
        assert_eq!(rank_f2(&b, 2), 3);
        assert_eq!(betti_numbers(&c, 2), vec![1, 1, 0]);
    }

    #[test]
    fn zero_matrix_rank() {
        let c = close_complex((0..4).map(|v| vec![v])).unwrap();
        let b = boundary_matrix(&c, &c.ordered()).unwrap();
        assert_eq!(rank_f2(&b, 1), 0);
    }

    /// Dense Gaussian elimination over F2, independent of the sparse code path.
    fn dense_rank(rows: usize, cols: &[Vec<usize>]) -> usize {
        let mut m: Vec<Vec<bool>> = cols
            .iter()
            .map(|c| {
                let mut v = vec![false; rows];
                for &r in c {
                    v[r] = true;
                }
                v
            })
            .collect();
        let mut rank = 0;
        for r in 0..rows {
            if let Some(p) = (rank..m.len()).find(|&c| m[c][r]) {
                m.swap(rank, p);
                let pivot = m[rank].clone();
                for (c, col) in m.iter_mut().enumerate() {
                    if c != rank && col[r] {
                        for (x, &y) in col.iter_mut().zip(&pivot) {
                            *x ^= y;
                        }
                    }
                }
                rank += 1;
            }
        }
        rank
    }

    fn brute_betti(c: &SimplicialComplex, max_dim: usize) -> Vec<usize> {
        let by_dim: Vec<Vec<Simplex>> = (0..=max_dim + 1)
            .map(|k| c.simplices().filter(|s| s.dim() == k).cloned().collect())
            .collect();
        let rank = |k: usize| -> usize {
            if k == 0 || k > max_dim + 1 || by_dim[k].is_empty() {
                return 0;
            }
            let rows = &by_dim[k - 1];
            let cols: Vec<Vec<usize>> = by_dim[k]
                .iter()
                .map(|s| s.facets().map(|f| rows.iter().position(|r| *r == f).unwrap()).collect())
                .collect();
            dense_rank(rows.len(), &cols)
        };
        (0..=max_dim).map(|k| by_dim[k].len() - rank(k) - rank(k + 1)).collect()
    }

    #[test]
    fn two_disjoint_filled_triangles() {
        let c = close_complex(vec![vec![0, 1, 2], vec![3, 4, 5]]).unwrap();
        assert_eq!(brute_betti(&c, 1), vec![2, 0]);
        assert_eq!(betti_numbers(&c, 1), vec![2, 0]);
    }

    #[test]
    fn hollow_tetrahedron() {
        let c = close_complex(vec![vec![0, 1, 2], vec![0, 1, 3], vec![0, 2, 3], vec![1, 2, 3]]).unwrap();
        assert_eq!(brute_betti(&c, 2), vec![1, 0, 1]);
        assert_eq!(betti_numbers(&c, 2), vec![1, 0, 1]);
    }

    fn components(c: &SimplicialComplex) -> usize {
        let verts: Vec<usize> = c
            .simplices()
            .filter(|s| s.dim() == 0)
            .map(|s| s.vertices()[0])
            .collect();
        let max = verts.iter().copied().max().unwrap_or(0);
        let mut parent: Vec<usize> = (0..=max).collect();
        fn find(p: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while p[r] != r {
                r = p[r];
            }
            p[x] = r;
            r
        }
        for s in c.simplices().filter(|s| s.dim() == 1) {
            let (a, b) = (find(&mut parent, s.vertices()[0]), find(&mut parent, s.vertices()[1]));
            parent[a] = b;
        }
        let mut roots: Vec<usize> = verts.iter().map(|&v| find(&mut parent, v)).collect();
        roots.sort_unstable();
        roots.dedup();
        roots.len()
    }

    fn arb_complex() -> impl Strategy<Value = SimplicialComplex> {
        prop::collection::vec(prop::collection::btree_set(0usize..7, 1..=4), 1..8)
            .prop_map(|gens| close_complex(gens.into_iter().map(|g| g.into_iter().collect())).unwrap())
    }

    proptest! {
        #[test]
        fn boundary_of_boundary_vanishes(c in arb_complex()) {
            let b = BoundaryMatrix::from_ordered(&c.ordered()).unwrap();
            for j in 0..b.len() {
                let mut acc: Vec<usize> = Vec::new();
                for &i in b.column(j) {
                    add_column(&mut acc, b.column(i));
                }
                prop_assert!(acc.is_empty());
            }
        }

        #[test]
        fn euler_poincare(c in arb_complex()) {
            let top = c.max_dim().unwrap();
            let betti = betti_numbers(&c, top);
            let chi_cells: i64 = c.counts_by_dim().iter().enumerate()
                .map(|(k, &n)| if k % 2 == 0 { n as i64 } else { -(n as i64) }).sum();
            let chi_betti: i64 = betti.iter().enumerate()
                .map(|(k, &b)| if k % 2 == 0 { b as i64 } else { -(b as i64) }).sum();
            prop_assert_eq!(chi_cells, chi_betti);
        }

        #[test]
        fn betti_matches_dense_oracle(c in arb_complex()) {
            let top = c.max_dim().unwrap();
            prop_assert_eq!(betti_numbers(&c, top), brute_betti(&c, top));
        }

        #[test]
        fn beta0_is_component_count(c in arb_complex()) {
            prop_assert_eq!(betti_numbers(&c, 0)[0], components(&c));
        }
    }
}
