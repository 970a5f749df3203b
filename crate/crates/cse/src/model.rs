//! Embedding storage and scoring primitives.
//!
//! Training maintains three matrices of identical shape `|V| × d`: the vertex
//! matrix used at recommendation time, plus user-context and item-context
//! matrices used only while optimizing neighborhood proximity. All matrices
//! hold `f32` entries.
//!
//! The export format is line-oriented text: a `<vertex_count> <dim>` header,
//! then one `<external-key> <f_1> ... <f_d>` line per vertex, users first in
//! id order. Only the vertex matrix is exported by default.

use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::BipartiteGraph;
use crate::loss;

/// Dense row-major `rows × dim` matrix of `f32`.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    data: Vec<f32>,
    rows: usize,
    dim: usize,
}

impl Embedding {
    pub fn zeros(rows: usize, dim: usize) -> Embedding {
        Embedding {
            data: vec![0.0; rows * dim],
            rows,
            dim,
        }
    }

    /// Entries i.i.d. uniform in the open interval `(−0.5/dim, +0.5/dim)`.
    pub fn uniform<R: Rng + ?Sized>(rows: usize, dim: usize, rng: &mut R) -> Embedding {
        let bound = 0.5 / dim as f32;
        let data = (0..rows * dim)
            .map(|_| loop {
                let v = (rng.random::<f32>() - 0.5) / dim as f32;
                if v.abs() < bound {
                    break v;
                }
            })
            .collect();
        Embedding { data, rows, dim }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.dim..(r + 1) * self.dim]
    }

    /// Raw pointer to row `r`; used by the lock-free trainer to obtain
    /// multiple rows of the same matrix at once.
    #[inline]
    pub(crate) fn row_ptr(&mut self, r: usize) -> *mut f32 {
        debug_assert!(r < self.rows);
        unsafe { self.data.as_mut_ptr().add(r * self.dim) }
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn approx_bytes(&self) -> usize {
        self.data.len() * std::mem::size_of::<f32>()
    }
}

/// How context matrices start out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContextInit {
    #[default]
    Zeros,
    Uniform,
}

/// The three jointly trained matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTriplet {
    /// Vertex representations; the only matrix consulted at serving time.
    pub vertex: Embedding,
    /// Context rows used when the walk center is a user.
    pub user_context: Embedding,
    /// Context rows used when the walk center is an item.
    pub item_context: Embedding,
}

impl EmbeddingTriplet {
    /// Initializes the triplet: vertex rows uniform in `(−0.5/d, +0.5/d)`,
    /// context rows all zero unless `context_init` says otherwise.
    pub fn init<R: Rng + ?Sized>(
        vertex_count: usize,
        dim: usize,
        context_init: ContextInit,
        rng: &mut R,
    ) -> EmbeddingTriplet {
        assert!(vertex_count >= 1 && dim >= 1);
        let vertex = Embedding::uniform(vertex_count, dim, rng);
        let (user_context, item_context) = match context_init {
            ContextInit::Zeros => (
                Embedding::zeros(vertex_count, dim),
                Embedding::zeros(vertex_count, dim),
            ),
            ContextInit::Uniform => (
                Embedding::uniform(vertex_count, dim, rng),
                Embedding::uniform(vertex_count, dim, rng),
            ),
        };
        EmbeddingTriplet {
            vertex,
            user_context,
            item_context,
        }
    }

    pub fn dim(&self) -> usize {
        self.vertex.dim()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex.rows()
    }

    pub fn is_finite(&self) -> bool {
        self.vertex.is_finite() && self.user_context.is_finite() && self.item_context.is_finite()
    }

    pub fn approx_bytes(&self) -> usize {
        self.vertex.approx_bytes()
            + self.user_context.approx_bytes()
            + self.item_context.approx_bytes()
    }
}

/// Dot-product score between two embedding rows.
#[inline]
pub fn score(a: &[f32], b: &[f32]) -> f32 {
    loss::dot(a, b)
}

/// Logistic squashing of a score; input clamped to ±6.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    loss::sigmoid(x)
}

/// Writes one matrix in the text export format, keyed by graph vertex order.
pub fn write_embeddings<W: Write>(
    mut w: W,
    graph: &BipartiteGraph,
    matrix: &Embedding,
) -> Result<()> {
    if matrix.rows() != graph.vertex_count() {
        return Err(Error::data("embedding row count does not match graph"));
    }
    writeln!(w, "{} {}", matrix.rows(), matrix.dim())?;
    for v in 0..matrix.rows() {
        write!(w, "{}", graph.key(crate::graph::VertexId(v as u32)))?;
        for x in matrix.row(v) {
            write!(w, " {}", x)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reads the text export format back: `(keys in file order, matrix)`.
pub fn read_embeddings<R: BufRead>(reader: R) -> Result<(Vec<String>, Embedding)> {
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::data("empty embedding file"))??;
    let mut parts = header.split_whitespace();
    let (rows, dim) = match (
        parts.next().and_then(|s| s.parse::<usize>().ok()),
        parts.next().and_then(|s| s.parse::<usize>().ok()),
    ) {
        (Some(r), Some(d)) if parts.next().is_none() => (r, d),
        _ => {
            return Err(Error::Parse {
                line: 1,
                msg: "expected header `<vertex_count> <dim>`".into(),
            })
        }
    };
    let mut keys = Vec::with_capacity(rows);
    let mut matrix = Embedding::zeros(rows, dim);
    for r in 0..rows {
        let line_no = r + 2;
        let line = lines.next().ok_or(Error::Parse {
            line: line_no,
            msg: "truncated embedding file".into(),
        })??;
        let mut fields = line.split_whitespace();
        let key = fields.next().ok_or(Error::Parse {
            line: line_no,
            msg: "missing key".into(),
        })?;
        keys.push(key.to_owned());
        let row = matrix.row_mut(r);
        for t in 0..dim {
            row[t] = fields
                .next()
                .and_then(|s| s.parse::<f32>().ok())
                .ok_or(Error::Parse {
                    line: line_no,
                    msg: format!("expected {dim} coordinates"),
                })?;
        }
        if fields.next().is_some() {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("more than {dim} coordinates"),
            });
        }
    }
    Ok((keys, matrix))
}
