//! Stable external merge sort of coordinate text files.
//!
//! Sorting a tensor file by one mode puts every slice of that mode on
//! consecutive lines, which is what lets the slice pipeline read the file in
//! one pass. The sort is the classic two-phase scheme: lines are collected
//! into runs of at most `buffer_bytes`, each run is stably sorted in RAM and
//! spilled to disk, and the runs are merged k-way. Equal keys keep their
//! input order throughout, matching a stable numeric `sort` on the key
//! column; the input file is never modified.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::mem::{MemClass, TrackedBuf};

/// Smallest accepted sort buffer: 1 MiB.
pub const MIN_BUFFER_BYTES: usize = 1 << 20;

/// Default sort buffer: 256 MiB. Large inputs only ever hold this much
/// line data in RAM at once; the buffer is an upper bound, not a
/// preallocation.
pub const DEFAULT_BUFFER_BYTES: usize = 256 << 20;

/// What a sort did, mostly for tests and logs.
#[derive(Debug, Clone, Copy)]
pub struct SortStats {
    pub lines: u64,
    pub runs: usize,
}

/// Maximum number of key columns (two are needed for fourth-order slice
/// stores, which sort by a mode pair).
const MAX_KEYS: usize = 2;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
struct Key([u64; MAX_KEYS]);

struct LineEntry {
    key: Key,
    start: usize,
    len: usize,
}

/// Stable numeric sort of `input` into `output`, keyed on 0-based column
/// `key_col`. Ties keep input order. Temporary run files are created in
/// `tmp_dir` and removed afterwards.
pub fn external_sort_by_mode(
    input: &Path,
    output: &Path,
    key_col: usize,
    buffer_bytes: usize,
    tmp_dir: &Path,
) -> Result<SortStats> {
    external_sort_by_cols(input, output, &[key_col], buffer_bytes, tmp_dir)
}

/// As [`external_sort_by_mode`] with a composite (lexicographic) key.
pub fn external_sort_by_cols(
    input: &Path,
    output: &Path,
    key_cols: &[usize],
    buffer_bytes: usize,
    tmp_dir: &Path,
) -> Result<SortStats> {
    if key_cols.is_empty() || key_cols.len() > MAX_KEYS {
        return Err(Error::InvalidArgument(format!(
            "sort supports 1 to {} key columns, got {}",
            MAX_KEYS,
            key_cols.len()
        )));
    }
    if buffer_bytes < MIN_BUFFER_BYTES {
        return Err(Error::InvalidArgument(format!(
            "sort buffer of {} bytes is below the {} byte minimum",
            buffer_bytes, MIN_BUFFER_BYTES
        )));
    }

    let file = std::fs::File::open(input).map_err(|e| Error::io(input, e))?;
    let mut reader = BufReader::new(file);

    let mut runs: Vec<PathBuf> = Vec::new();
    let mut bytes = TrackedBuf::<u8>::new(MemClass::SortRun);
    let mut entries: TrackedBuf<LineEntry> = TrackedBuf::new(MemClass::SortRun);

    let mut raw = Vec::new();
    let mut line_no = 0u64;
    let mut total_lines = 0u64;
    loop {
        raw.clear();
        let n = reader
            .read_until(b'\n', &mut raw)
            .map_err(|e| Error::io(input, e))?;
        if n == 0 {
            break;
        }
        line_no += 1;
        let mut line: &[u8] = &raw;
        while let [rest @ .., b'\n' | b'\r'] = line {
            line = rest;
        }
        if line.iter().all(|b| b.is_ascii_whitespace()) {
            continue;
        }
        total_lines += 1;
        let key = parse_key(input, line_no, line, key_cols)?;
        let start = bytes.len();
        bytes.extend_from_slice(line);
        entries.push(LineEntry {
            key,
            start,
            len: line.len(),
        });

        let entry_bytes = entries.len() * std::mem::size_of::<LineEntry>();
        if bytes.len() + entry_bytes >= buffer_bytes {
            runs.push(spill_run(tmp_dir, runs.len(), &bytes, &mut entries)?);
            bytes.clear();
        }
    }

    if runs.is_empty() {
        // Single in-memory run: sort and write straight to the output.
        sort_entries(&mut entries);
        let out = std::fs::File::create(output).map_err(|e| Error::io(output, e))?;
        let mut w = BufWriter::new(out);
        for e in entries.iter() {
            w.write_all(&bytes[e.start..e.start + e.len])
                .map_err(|err| Error::io(output, err))?;
            w.write_all(b"\n").map_err(|err| Error::io(output, err))?;
        }
        w.flush().map_err(|err| Error::io(output, err))?;
        return Ok(SortStats {
            lines: total_lines,
            runs: 1,
        });
    }

    if !entries.is_empty() {
        runs.push(spill_run(tmp_dir, runs.len(), &bytes, &mut entries)?);
    }
    drop(bytes);

    merge_runs(&runs, output, key_cols)?;
    for r in &runs {
        let _ = std::fs::remove_file(r);
    }
    Ok(SortStats {
        lines: total_lines,
        runs: runs.len(),
    })
}

fn parse_key(path: &Path, line_no: u64, line: &[u8], key_cols: &[usize]) -> Result<Key> {
    let text = std::str::from_utf8(line).map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line: line_no,
        msg: "line is not valid UTF-8".into(),
    })?;
    let fields: Vec<&str> = text.split_whitespace().collect();
    let mut key = [0u64; MAX_KEYS];
    for (slot, &col) in key.iter_mut().zip(key_cols.iter()) {
        let tok = fields.get(col).ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            msg: format!(
                "line has {} fields, key column {} missing",
                fields.len(),
                col + 1
            ),
        })?;
        *slot = tok.parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            msg: format!("key column {} is not an integer: {:?}", col + 1, tok),
        })?;
    }
    Ok(Key(key))
}

fn sort_entries(entries: &mut [LineEntry]) {
    // Stable: equal keys keep their arrival order.
    entries.sort_by_key(|e| e.key);
}

fn spill_run(
    tmp_dir: &Path,
    index: usize,
    bytes: &TrackedBuf<u8>,
    entries: &mut TrackedBuf<LineEntry>,
) -> Result<PathBuf> {
    sort_entries(entries);
    let path = tmp_dir.join(format!("run-{:05}.txt", index));
    let file = std::fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    for e in entries.iter() {
        w.write_all(&bytes[e.start..e.start + e.len])
            .map_err(|err| Error::io(&path, err))?;
        w.write_all(b"\n").map_err(|err| Error::io(&path, err))?;
    }
    w.flush().map_err(|err| Error::io(&path, err))?;
    entries.clear();
    Ok(path)
}

struct HeapItem {
    key: Key,
    run: usize,
    line: Vec<u8>,
}

impl PartialEq for HeapItem {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key && self.run == other.run
    }
}
impl Eq for HeapItem {}
impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed for a min-heap; runs partition the input in order, so the
        // run index is the stability tie-break.
        other
            .key
            .cmp(&self.key)
            .then_with(|| other.run.cmp(&self.run))
    }
}

fn merge_runs(runs: &[PathBuf], output: &Path, key_cols: &[usize]) -> Result<()> {
    let mut readers: Vec<BufReader<std::fs::File>> = Vec::with_capacity(runs.len());
    for r in runs {
        readers.push(BufReader::new(
            std::fs::File::open(r).map_err(|e| Error::io(r, e))?,
        ));
    }

    let mut heap = BinaryHeap::new();
    for (i, reader) in readers.iter_mut().enumerate() {
        if let Some(item) = next_line(reader, &runs[i], i, key_cols)? {
            heap.push(item);
        }
    }

    let out = std::fs::File::create(output).map_err(|e| Error::io(output, e))?;
    let mut w = BufWriter::new(out);
    while let Some(item) = heap.pop() {
        w.write_all(&item.line).map_err(|e| Error::io(output, e))?;
        w.write_all(b"\n").map_err(|e| Error::io(output, e))?;
        if let Some(next) = next_line(&mut readers[item.run], &runs[item.run], item.run, key_cols)?
        {
            heap.push(next);
        }
    }
    w.flush().map_err(|e| Error::io(output, e))?;
    Ok(())
}

fn next_line(
    reader: &mut BufReader<std::fs::File>,
    path: &Path,
    run: usize,
    key_cols: &[usize],
) -> Result<Option<HeapItem>> {
    let mut raw = Vec::new();
    loop {
        raw.clear();
        let n = reader
            .read_until(b'\n', &mut raw)
            .map_err(|e| Error::io(path, e))?;
        if n == 0 {
            return Ok(None);
        }
        let mut line: &[u8] = &raw;
        while let [rest @ .., b'\n' | b'\r'] = line {
            line = rest;
        }
        if line.iter().all(|b| b.is_ascii_whitespace()) {
            continue;
        }
        let key = parse_key(path, 0, line, key_cols)?;
        return Ok(Some(HeapItem {
            key,
            run,
            line: line.to_vec(),
        }));
    }
}
