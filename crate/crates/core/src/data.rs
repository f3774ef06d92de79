//! Dataset ingestion and contingency tables.
//!
//! A dataset is an `n x (p+1)` matrix of category codes together with the
//! number of categories per column; the last column is the binary response.
//! Rows containing a missing value (`NA` or an empty field) are dropped at
//! load time, before any analysis. Dropping is global, not per variable
//! subset, so every table built from the same dataset shares one row count.
//!
//! Cells of a contingency table are addressed by a mixed-radix encoding of
//! the category codes in variable order with the *first* variable as the
//! fastest-varying digit. The encoding is part of the on-disk contract for
//! golden files and must not change.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Column dimensions: declared explicitly or inferred from the data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DimensSpec {
    /// Each column's dimension is `1 + max observed code`.
    Auto,
    /// One dimension per column, in column order.
    Explicit(Vec<usize>),
}

/// Immutable categorical dataset with a binary response in the last column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    names: Vec<String>,
    dimens: Vec<usize>,
    /// Column-major storage of category codes.
    columns: Vec<Vec<u8>>,
    n_rows: usize,
    dropped_rows: usize,
    /// For columns whose raw tokens were not integer codes: the labels in
    /// first-appearance order (index = assigned code). Empty for columns
    /// read as integers.
    label_maps: Vec<Vec<String>>,
}

impl Dataset {
    /// Builds a dataset from already-coded rows. Used by the simulator and
    /// the recoder; validates the same invariants as [`load_dataset`].
    pub fn from_rows(
        names: Vec<String>,
        dimens: Vec<usize>,
        rows: &[Vec<u8>],
    ) -> Result<Dataset> {
        let mut columns = vec![Vec::with_capacity(rows.len()); names.len()];
        for row in rows {
            if row.len() != names.len() {
                return Err(Error::data("row length does not match column count"));
            }
            for (c, &code) in row.iter().enumerate() {
                columns[c].push(code);
            }
        }
        Self::from_columns(names, dimens, columns, 0, Vec::new())
    }

    pub(crate) fn from_columns(
        names: Vec<String>,
        dimens: Vec<usize>,
        columns: Vec<Vec<u8>>,
        dropped_rows: usize,
        mut label_maps: Vec<Vec<String>>,
    ) -> Result<Dataset> {
        if names.len() != dimens.len() || names.len() != columns.len() {
            return Err(Error::data("names, dimens and columns must align"));
        }
        if names.is_empty() {
            return Err(Error::data("dataset needs at least one column"));
        }
        if label_maps.is_empty() {
            label_maps = vec![Vec::new(); names.len()];
        }
        let n_rows = columns[0].len();
        if n_rows == 0 {
            return Err(Error::data("dataset has no usable rows"));
        }
        {
            let mut seen = HashMap::new();
            for (i, name) in names.iter().enumerate() {
                if let Some(prev) = seen.insert(name.as_str(), i) {
                    return Err(Error::data(format!(
                        "duplicate column name '{}' (columns {} and {})",
                        name, prev, i
                    )));
                }
            }
        }
        for (c, col) in columns.iter().enumerate() {
            if col.len() != n_rows {
                return Err(Error::data("ragged columns"));
            }
            let dim = dimens[c];
            if dim == 0 || dim > 256 {
                return Err(Error::data(format!(
                    "column '{}' has unsupported dimension {}",
                    names[c], dim
                )));
            }
            if let Some(&bad) = col.iter().find(|&&v| (v as usize) >= dim) {
                return Err(Error::data(format!(
                    "column '{}' contains code {} but has dimension {}",
                    names[c], bad, dim
                )));
            }
        }
        let resp = names.len() - 1;
        if dimens[resp] != 2 {
            return Err(Error::data(format!(
                "response column '{}' must be binary, got dimension {}",
                names[resp], dimens[resp]
            )));
        }
        Ok(Dataset {
            names,
            dimens,
            columns,
            n_rows,
            dropped_rows,
            label_maps,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn dimens(&self) -> &[usize] {
        &self.dimens
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_columns(&self) -> usize {
        self.names.len()
    }

    /// Number of rows removed at load time because of missing values.
    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    /// Index of the response column (always the last column).
    pub fn response_index(&self) -> usize {
        self.names.len() - 1
    }

    /// Candidate predictor columns, i.e. every column but the response.
    pub fn predictor_columns(&self) -> Vec<usize> {
        (0..self.response_index()).collect()
    }

    pub fn column(&self, c: usize) -> &[u8] {
        &self.columns[c]
    }

    pub fn code(&self, row: usize, col: usize) -> u8 {
        self.columns[col][row]
    }

    /// Label list for columns that needed string-to-code mapping
    /// (first-appearance order; empty when the column was read as integers).
    pub fn label_map(&self, c: usize) -> &[String] {
        &self.label_maps[c]
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Replaces one column; test support for building dataset variants.
    #[cfg(test)]
    pub(crate) fn with_column(&self, c: usize, codes: Vec<u8>, dim: usize) -> Result<Dataset> {
        let mut columns = self.columns.clone();
        let mut dimens = self.dimens.clone();
        debug_assert_eq!(codes.len(), self.n_rows);
        columns[c] = codes;
        dimens[c] = dim;
        Dataset::from_columns(
            self.names.clone(),
            dimens,
            columns,
            self.dropped_rows,
            self.label_maps.clone(),
        )
    }

    /// Renders the dataset back to delimited text (codes, not labels).
    pub fn to_csv_string(&self, delimiter: char) -> String {
        let mut out = String::new();
        let mut first = true;
        for name in &self.names {
            if !first {
                out.push(delimiter);
            }
            out.push_str(name);
            first = false;
        }
        out.push('\n');
        for r in 0..self.n_rows {
            for (c, col) in self.columns.iter().enumerate() {
                if c > 0 {
                    out.push(delimiter);
                }
                let _ = write!(out, "{}", col[r]);
            }
            out.push('\n');
        }
        out
    }

    /// Dimension sidecar contents: one integer per line, in column order.
    pub fn dimens_sidecar(&self) -> String {
        let mut out = String::new();
        for d in &self.dimens {
            let _ = writeln!(out, "{}", d);
        }
        out
    }
}

/// Dense contingency table over an ordered subset of columns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    variables: Vec<usize>,
    dimens: Vec<usize>,
    counts: Vec<u64>,
    total: u64,
}

impl ContingencyTable {
    /// Assembles a table from already-tallied counts (internal; callers
    /// guarantee the shape).
    pub(crate) fn from_parts(
        variables: Vec<usize>,
        dimens: Vec<usize>,
        counts: Vec<u64>,
    ) -> ContingencyTable {
        debug_assert_eq!(counts.len(), dimens.iter().product::<usize>());
        let total = counts.iter().sum();
        ContingencyTable {
            variables,
            dimens,
            counts,
            total,
        }
    }

    pub fn variables(&self) -> &[usize] {
        &self.variables
    }

    pub fn dimens(&self) -> &[usize] {
        &self.dimens
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn n_cells(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Mixed-radix cell index for one combination of codes (first variable
    /// fastest).
    pub fn encode(&self, codes: &[u8]) -> usize {
        debug_assert_eq!(codes.len(), self.dimens.len());
        let mut idx = 0usize;
        let mut stride = 1usize;
        for (d, &c) in self.dimens.iter().zip(codes) {
            debug_assert!((c as usize) < *d);
            idx += c as usize * stride;
            stride *= d;
        }
        idx
    }

    /// Inverse of [`encode`](Self::encode).
    pub fn decode(&self, mut idx: usize, out: &mut [u8]) {
        debug_assert_eq!(out.len(), self.dimens.len());
        for (o, d) in out.iter_mut().zip(&self.dimens) {
            *o = (idx % d) as u8;
            idx /= d;
        }
    }

    /// Sum-collapses this table onto a subset of its variables.
    ///
    /// The subset keeps the relative order it has in `self.variables`. The
    /// result equals `contingency_table(data, vars)` built directly from the
    /// rows; that equality is the marginalization property exercised by the
    /// tests.
    pub fn margin(&self, vars: &[usize]) -> Result<ContingencyTable> {
        if vars.is_empty() {
            return Err(Error::invalid("margin requires a non-empty variable set"));
        }
        let positions: Vec<usize> = vars
            .iter()
            .map(|v| {
                self.variables
                    .iter()
                    .position(|w| w == v)
                    .ok_or_else(|| Error::invalid(format!("variable {} not in table", v)))
            })
            .collect::<Result<_>>()?;
        {
            let mut sorted = positions.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != positions.len() {
                return Err(Error::invalid("margin variables must be distinct"));
            }
        }
        let dimens: Vec<usize> = positions.iter().map(|&p| self.dimens[p]).collect();
        let n_cells: usize = dimens.iter().product();
        let mut counts = vec![0u64; n_cells];

        let mut codes = vec![0u8; self.dimens.len()];
        let mut sub = ContingencyTable {
            variables: vars.to_vec(),
            dimens,
            counts: Vec::new(),
            total: 0,
        };
        let mut sub_codes = vec![0u8; positions.len()];
        for (idx, &count) in self.counts.iter().enumerate() {
            if count == 0 {
                continue;
            }
            self.decode(idx, &mut codes);
            for (o, &p) in sub_codes.iter_mut().zip(&positions) {
                *o = codes[p];
            }
            counts[sub.encode(&sub_codes)] += count;
        }
        sub.counts = counts;
        sub.total = self.total;
        Ok(sub)
    }
}

/// Tallies the rows of `data` over `vars` into a dense table.
pub fn contingency_table(data: &Dataset, vars: &[usize]) -> Result<ContingencyTable> {
    contingency_table_filtered(data, vars, None)
}

/// Same as [`contingency_table`] but restricted to a subset of rows
/// (used by cross-validation folds).
pub fn contingency_table_filtered(
    data: &Dataset,
    vars: &[usize],
    rows: Option<&[usize]>,
) -> Result<ContingencyTable> {
    if vars.is_empty() {
        return Err(Error::invalid("variable set must be non-empty"));
    }
    {
        let mut sorted = vars.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != vars.len() {
            return Err(Error::invalid("variable set contains duplicate indices"));
        }
    }
    for &v in vars {
        if v >= data.n_columns() {
            return Err(Error::invalid(format!("column index {} out of range", v)));
        }
    }
    let dimens: Vec<usize> = vars.iter().map(|&v| data.dimens[v]).collect();
    let n_cells: usize = dimens.iter().product();
    const MAX_CELLS: usize = 1 << 26;
    if n_cells > MAX_CELLS {
        return Err(Error::invalid(format!(
            "table over {} cells exceeds the in-memory limit",
            n_cells
        )));
    }

    let mut strides = Vec::with_capacity(vars.len());
    let mut stride = 1usize;
    for &d in &dimens {
        strides.push(stride);
        stride *= d;
    }

    let mut counts = vec![0u64; n_cells];
    let cols: Vec<&[u8]> = vars.iter().map(|&v| data.column(v)).collect();
    let mut tally = |r: usize| {
        let mut idx = 0usize;
        for (col, &s) in cols.iter().zip(&strides) {
            idx += col[r] as usize * s;
        }
        counts[idx] += 1;
    };
    let total = match rows {
        None => {
            for r in 0..data.n_rows() {
                tally(r);
            }
            data.n_rows() as u64
        }
        Some(idx) => {
            for &r in idx {
                tally(r);
            }
            idx.len() as u64
        }
    };
    Ok(ContingencyTable {
        variables: vars.to_vec(),
        dimens,
        counts,
        total,
    })
}

/// Loads a delimited text file with a header row.
///
/// The delimiter is auto-detected from the header line (tab, comma or
/// semicolon, in that order of preference). Cells equal to `NA` or empty
/// after trimming are missing values; rows containing any missing value are
/// dropped and counted. Columns whose tokens all parse as non-negative
/// integers are used as codes directly; other columns get codes assigned in
/// first-appearance order, recorded in the dataset's label maps.
pub fn load_dataset(path: &Path, dimens: DimensSpec) -> Result<Dataset> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_dataset(&text, dimens)
}

/// Reads a dimension sidecar: one positive integer per line.
pub fn load_dimens_sidecar(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let d: usize = line
            .parse()
            .map_err(|_| Error::data(format!("dimens line {}: '{}' is not an integer", i + 1, line)))?;
        if d == 0 {
            return Err(Error::data(format!("dimens line {}: dimension must be positive", i + 1)));
        }
        out.push(d);
    }
    if out.is_empty() {
        return Err(Error::data("dimens sidecar is empty"));
    }
    Ok(out)
}

fn detect_delimiter(header: &str) -> char {
    if header.contains('\t') {
        '\t'
    } else if header.contains(',') {
        ','
    } else if header.contains(';') {
        ';'
    } else {
        // Single-column file; the delimiter never fires.
        ','
    }
}

fn clean(token: &str) -> &str {
    token.trim().trim_matches('"')
}

fn is_missing(token: &str) -> bool {
    token.is_empty() || token == "NA"
}

pub(crate) fn parse_dataset(text: &str, dimens: DimensSpec) -> Result<Dataset> {
    let mut lines = text.lines();
    let header = loop {
        match lines.next() {
            Some(l) if l.trim().is_empty() => continue,
            Some(l) => break l,
            None => return Err(Error::data("empty file")),
        }
    };
    let delim = detect_delimiter(header);
    let names: Vec<String> = header
        .split(delim)
        .map(|t| clean(t).to_string())
        .collect();
    let p = names.len();
    if names.iter().any(|n| n.is_empty()) {
        return Err(Error::data("header contains an empty column name"));
    }

    // First pass: field counts, missing rows, per-column integerness and
    // the maximum integer code. Tokens are never copied.
    let body_start = lines;
    let mut all_integer = vec![true; p];
    let mut max_code = vec![0u32; p];
    let mut kept_rows = 0usize;
    let mut dropped = 0usize;
    for (lineno, line) in body_start.clone().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = 0usize;
        let mut missing = false;
        for token in line.split(delim) {
            fields += 1;
            if fields > p {
                break;
            }
            if is_missing(clean(token)) {
                missing = true;
            }
        }
        if fields != p {
            return Err(Error::data(format!(
                "line {}: expected {} fields, found {}",
                lineno + 2,
                p,
                fields
            )));
        }
        if missing {
            dropped += 1;
            continue;
        }
        kept_rows += 1;
        for (c, token) in line.split(delim).enumerate() {
            if !all_integer[c] {
                continue;
            }
            match clean(token).parse::<u32>() {
                Ok(v) => max_code[c] = max_code[c].max(v),
                Err(_) => all_integer[c] = false,
            }
        }
    }
    if kept_rows == 0 {
        return Err(Error::data("no usable rows after dropping missing values"));
    }

    let declared = match &dimens {
        DimensSpec::Auto => None,
        DimensSpec::Explicit(d) => {
            if d.len() != p {
                return Err(Error::data(format!(
                    "dimens has {} entries but the file has {} columns",
                    d.len(),
                    p
                )));
            }
            Some(d.clone())
        }
    };
    for c in 0..p {
        if all_integer[c] {
            if max_code[c] > 255 {
                return Err(Error::data(format!(
                    "column '{}' has code {} beyond the supported range",
                    names[c], max_code[c]
                )));
            }
        } else if declared.is_some() {
            return Err(Error::data(format!(
                "column '{}' contains a non-integer cell but dimens were declared",
                names[c]
            )));
        }
    }

    // Second pass: fill the code columns; string labels get codes in
    // first-appearance order.
    let mut columns: Vec<Vec<u8>> = (0..p).map(|_| Vec::with_capacity(kept_rows)).collect();
    let mut label_maps: Vec<Vec<String>> = vec![Vec::new(); p];
    let mut label_lookup: Vec<HashMap<String, u8>> = vec![HashMap::new(); p];
    for line in body_start {
        if line.trim().is_empty() {
            continue;
        }
        let tokens = line.split(delim).map(clean);
        if tokens.clone().any(is_missing) {
            continue;
        }
        for (c, token) in tokens.enumerate() {
            let code = if all_integer[c] {
                token.parse::<u32>().unwrap() as u8
            } else {
                match label_lookup[c].get(token) {
                    Some(&code) => code,
                    None => {
                        let next = label_maps[c].len();
                        if next > 255 {
                            return Err(Error::data(format!(
                                "column '{}' has more than 256 distinct labels",
                                names[c]
                            )));
                        }
                        label_maps[c].push(token.to_string());
                        label_lookup[c].insert(token.to_string(), next as u8);
                        next as u8
                    }
                }
            };
            columns[c].push(code);
        }
    }

    let out_dimens: Vec<usize> = (0..p)
        .map(|c| match (&declared, all_integer[c]) {
            (Some(d), _) => d[c],
            (None, true) => max_code[c] as usize + 1,
            (None, false) => label_maps[c].len(),
        })
        .collect();

    Dataset::from_columns(names, out_dimens, columns, dropped, label_maps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(text: &str) -> Dataset {
        parse_dataset(text, DimensSpec::Auto).unwrap()
    }

    #[test]
    fn rows_with_missing_values_are_dropped() {
        let d = toy("a,b,y\n0,1,0\n1,NA,1\n2,0,1\n0,,0\n1,1,1\n");
        assert_eq!(d.n_rows(), 3);
        assert_eq!(d.dropped_rows(), 2);
    }

    #[test]
    fn auto_dimens_is_one_plus_max_code() {
        let d = toy("a,y\n0,0\n2,1\n1,0\n");
        assert_eq!(d.dimens(), &[3, 2]);
    }

    #[test]
    fn non_binary_response_is_rejected() {
        let err = parse_dataset("a,y\n0,0\n1,2\n", DimensSpec::Auto).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn code_above_declared_dimension_is_rejected() {
        let err = parse_dataset("a,y\n0,0\n3,1\n", DimensSpec::Explicit(vec![3, 2])).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn non_integer_cell_with_declared_dimens_is_rejected() {
        let err = parse_dataset("a,y\nx,0\ny,1\n", DimensSpec::Explicit(vec![2, 2])).unwrap_err();
        assert!(matches!(err, Error::Data(_)));
    }

    #[test]
    fn empty_file_is_rejected() {
        assert!(matches!(
            parse_dataset("", DimensSpec::Auto),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn string_labels_map_in_first_appearance_order() {
        let d = toy("snp,y\nAA,0\nAB,1\nAA,0\nBB,1\n");
        assert_eq!(d.label_map(0), &["AA", "AB", "BB"]);
        assert_eq!(d.column(0), &[0, 1, 0, 2]);
        assert_eq!(d.dimens(), &[3, 2]);
    }

    #[test]
    fn tab_delimiter_is_detected() {
        let d = toy("a\ty\n0\t0\n1\t1\n");
        assert_eq!(d.n_rows(), 2);
        assert_eq!(d.names(), &["a", "y"]);
    }

    #[test]
    fn quoted_headers_are_stripped() {
        let d = toy("\"a\",\"y\"\n0,0\n1,1\n");
        assert_eq!(d.names(), &["a", "y"]);
    }

    #[test]
    fn duplicate_column_names_are_rejected() {
        assert!(parse_dataset("a,a\n0,0\n1,1\n", DimensSpec::Auto).is_err());
    }

    // Rows (0,0), (0,1), (1,1). Under the first-variable-fastest encoding
    // the joint cells in index order (00, 10, 01, 11) tally to (1, 0, 1, 1).
    #[test]
    fn joint_table_tally() {
        let d = Dataset::from_rows(
            vec!["a".into(), "y".into()],
            vec![2, 2],
            &[vec![0, 0], vec![0, 1], vec![1, 1]],
        )
        .unwrap();
        let t = contingency_table(&d, &[0, 1]).unwrap();
        assert_eq!(t.counts(), &[1, 0, 1, 1]);
        assert_eq!(t.total(), 3);
        let m = contingency_table(&d, &[0]).unwrap();
        assert_eq!(m.counts(), &[2, 1]);
    }

    #[test]
    fn empty_variable_set_is_rejected() {
        let d = toy("a,y\n0,0\n1,1\n");
        assert!(contingency_table(&d, &[]).is_err());
        assert!(contingency_table(&d, &[0, 0]).is_err());
    }

    #[test]
    fn margin_matches_direct_tally() {
        let d = toy("a,b,y\n0,1,0\n2,1,1\n1,0,0\n2,2,1\n0,0,0\n1,2,1\n2,1,0\n");
        let joint = contingency_table(&d, &[0, 1, 2]).unwrap();
        for vars in [vec![0], vec![1], vec![2], vec![0, 1], vec![0, 2], vec![1, 2]] {
            let direct = contingency_table(&d, &vars).unwrap();
            let collapsed = joint.margin(&vars).unwrap();
            assert_eq!(direct, collapsed, "vars {:?}", vars);
            assert_eq!(direct.total(), d.n_rows() as u64);
        }
    }

    #[test]
    fn load_from_disk_with_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("toy.csv");
        std::fs::write(&csv, "a,b,y\n0,1,0\n1,NA,1\n2,0,1\n1,1,0\n").unwrap();
        let sidecar = dir.path().join("toy.dimens");
        std::fs::write(&sidecar, "3\n2\n2\n").unwrap();
        let dims = load_dimens_sidecar(&sidecar).unwrap();
        assert_eq!(dims, vec![3, 2, 2]);
        let d = load_dataset(&csv, DimensSpec::Explicit(dims)).unwrap();
        assert_eq!(d.n_rows(), 3);
        assert_eq!(d.dropped_rows(), 1);
        assert!(matches!(
            load_dataset(&dir.path().join("missing.csv"), DimensSpec::Auto),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn csv_round_trip_preserves_codes() {
        let d = toy("a,b,y\n0,1,0\n2,0,1\n1,1,0\n");
        let text = d.to_csv_string(',');
        let d2 = parse_dataset(&text, DimensSpec::Explicit(d.dimens().to_vec())).unwrap();
        assert_eq!(d, d2);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_dataset() -> impl Strategy<Value = Dataset> {
            (2usize..5, 5usize..40).prop_flat_map(|(p, n)| {
                let dims = proptest::collection::vec(2usize..4, p - 1);
                dims.prop_flat_map(move |mut dims| {
                    dims.push(2);
                    let per_row: Vec<std::ops::Range<u8>> =
                        dims.iter().map(|&d| 0..d as u8).collect();
                    let rows = proptest::collection::vec(per_row, n);
                    let names: Vec<String> =
                        (0..dims.len()).map(|i| format!("c{}", i)).collect();
                    let dims2 = dims.clone();
                    rows.prop_map(move |rows| {
                        let rows: Vec<Vec<u8>> = rows;
                        Dataset::from_rows(names.clone(), dims2.clone(), &rows).unwrap()
                    })
                })
            })
        }

        proptest! {
            // For every nested pair B within C, the direct tally over B
            // equals the sum-collapse of the C table.
            #[test]
            fn nested_margin_equals_direct(data in arb_dataset()) {
                let p = data.n_columns();
                let subsets: Vec<Vec<usize>> = (1u32..(1 << p))
                    .map(|mask| (0..p).filter(|&i| mask & (1 << i) != 0).collect())
                    .collect();
                for big in &subsets {
                    let table_c = contingency_table(&data, big).unwrap();
                    prop_assert_eq!(table_c.total(), data.n_rows() as u64);
                    for small in &subsets {
                        if small.len() >= big.len()
                            || !small.iter().all(|v| big.contains(v))
                        {
                            continue;
                        }
                        let direct = contingency_table(&data, small).unwrap();
                        let collapsed = table_c.margin(small).unwrap();
                        prop_assert_eq!(direct, collapsed);
                    }
                }
            }
        }
    }
}
