//! Vector file formats and model bundles.
//!
//! Both formats share a plain-text header line `<count> <dim>`. The text
//! format follows with one `<label> <v1> ... <v_dim>` line per vector,
//! decimal floats at six decimal places. The binary format follows with, per
//! vector: the label bytes, a single space, then `dim` little-endian 32-bit
//! IEEE-754 floats with no separator before the next label.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::model::{EmbeddingModel, VectorSet};
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorFormat {
    Text,
    Binary,
}

impl VectorFormat {
    pub fn extension(self) -> &'static str {
        match self {
            VectorFormat::Text => "txt",
            VectorFormat::Binary => "bin",
        }
    }

    /// Infers the format from a file extension; `.bin` is binary, anything
    /// else text.
    pub fn from_path(path: &Path) -> VectorFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => VectorFormat::Binary,
            _ => VectorFormat::Text,
        }
    }
}

impl std::str::FromStr for VectorFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(VectorFormat::Text),
            "binary" => Ok(VectorFormat::Binary),
            other => Err(Error::InvalidConfig(format!(
                "unknown vector format {other:?}; expected \"text\" or \"binary\""
            ))),
        }
    }
}

fn parse_header(path: &Path, line: &str, lineno: usize) -> Result<(usize, usize)> {
    let mut parts = line.split_whitespace();
    let n = parts.next().and_then(|s| s.parse::<usize>().ok());
    let dim = parts.next().and_then(|s| s.parse::<usize>().ok());
    match (n, dim, parts.next()) {
        (Some(n), Some(dim), None) if dim >= 1 => Ok((n, dim)),
        _ => Err(Error::malformed(
            path,
            lineno,
            format!("malformed header {line:?}; expected \"<count> <dim>\""),
        )),
    }
}

fn check_label(label: &str) -> Result<()> {
    if label.is_empty() || label.chars().any(|c| c.is_whitespace()) {
        return Err(Error::InvalidConfig(format!(
            "label {label:?} cannot be stored: empty or contains whitespace"
        )));
    }
    Ok(())
}

pub fn read_vector_set(path: impl AsRef<Path>, format: VectorFormat) -> Result<VectorSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    match format {
        VectorFormat::Text => read_text(path, &mut reader),
        VectorFormat::Binary => read_binary(path, &mut reader),
    }
}

pub fn write_vector_set(
    set: &VectorSet,
    path: impl AsRef<Path>,
    format: VectorFormat,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut writer = BufWriter::new(file);
    let result = match format {
        VectorFormat::Text => write_text(set, &mut writer),
        VectorFormat::Binary => write_binary(set, &mut writer),
    };
    result
        .and_then(|_| writer.flush())
        .map_err(|e| Error::io(path, e))
}

fn read_text(path: &Path, reader: &mut impl BufRead) -> Result<VectorSet> {
    let mut lines = reader.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::malformed(path, 1, "empty file"))?;
    let header = header.map_err(|e| Error::io(path, e))?;
    let (n, dim) = parse_header(path, &header, 1)?;

    let mut labels = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n * dim);
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        if labels.len() == n {
            return Err(Error::malformed(
                path,
                lineno,
                format!("more than {n} vector rows"),
            ));
        }
        let mut fields = line.split_whitespace();
        let label = fields.next().unwrap();
        let start = values.len();
        for field in fields {
            let v: f32 = field.parse().map_err(|_| {
                Error::malformed(path, lineno, format!("bad float {field:?}"))
            })?;
            if !v.is_finite() {
                return Err(Error::malformed(path, lineno, "non-finite value"));
            }
            values.push(v);
        }
        let row_dim = values.len() - start;
        if row_dim != dim {
            return Err(Error::malformed(
                path,
                lineno,
                format!("row has {row_dim} values, expected {dim}"),
            ));
        }
        labels.push(label.to_owned());
    }
    if labels.len() != n {
        return Err(Error::malformed(
            path,
            0,
            format!("header declares {n} rows but file has {}", labels.len()),
        ));
    }
    let matrix = Array2::from_shape_vec((n, dim), values).expect("shape checked per row");
    VectorSet::new(labels, matrix)
}

fn write_text(set: &VectorSet, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "{} {}", set.len(), set.dim())?;
    for (label, row) in set.labels().iter().zip(set.matrix().rows()) {
        write!(w, "{label}")?;
        for v in row {
            write!(w, " {v:.6}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

fn read_binary(path: &Path, reader: &mut impl BufRead) -> Result<VectorSet> {
    let mut header = Vec::new();
    reader
        .read_until(b'\n', &mut header)
        .map_err(|e| Error::io(path, e))?;
    let header = String::from_utf8(header)
        .map_err(|_| Error::malformed(path, 1, "header is not UTF-8"))?;
    let (n, dim) = parse_header(path, header.trim_end(), 1)?;

    let mut labels = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n * dim);
    let mut buf = vec![0u8; dim * 4];
    for row in 0..n {
        let mut label_bytes = Vec::new();
        reader
            .read_until(b' ', &mut label_bytes)
            .map_err(|e| Error::io(path, e))?;
        if label_bytes.pop() != Some(b' ') {
            return Err(Error::malformed(
                path,
                row + 2,
                "unexpected end of file in label",
            ));
        }
        let label = String::from_utf8(label_bytes)
            .map_err(|_| Error::malformed(path, row + 2, "label is not UTF-8"))?;
        reader
            .read_exact(&mut buf)
            .map_err(|e| Error::io(path, e))?;
        for chunk in buf.chunks_exact(4) {
            let v = f32::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::malformed(path, row + 2, "non-finite value"));
            }
            values.push(v);
        }
        labels.push(label);
    }
    let mut trailing = [0u8; 1];
    if reader.read(&mut trailing).map_err(|e| Error::io(path, e))? != 0 {
        return Err(Error::malformed(path, n + 2, "trailing bytes after last vector"));
    }
    let matrix = Array2::from_shape_vec((n, dim), values).expect("read exactly n*dim values");
    VectorSet::new(labels, matrix)
}

fn write_binary(set: &VectorSet, w: &mut impl Write) -> std::io::Result<()> {
    writeln!(w, "{} {}", set.len(), set.dim())?;
    for (label, row) in set.labels().iter().zip(set.matrix().rows()) {
        w.write_all(label.as_bytes())?;
        w.write_all(b" ")?;
        for v in row {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

/// Loads a single vector file as a model: the file's vectors become target
/// vectors over a unit-count vocabulary, contexts are zero, sources absent.
pub fn load_vectors(path: impl AsRef<Path>, format: VectorFormat) -> Result<EmbeddingModel> {
    let set = read_vector_set(&path, format)?;
    let vocab = Vocabulary::from_tokens(set.labels().to_vec())?;
    let matrix = set.matrix().to_owned();
    EmbeddingModel::from_targets(vocab, matrix)
}

/// Saves a model's target vectors to a single file loadable by [`load_vectors`].
pub fn save_vectors(
    model: &EmbeddingModel,
    path: impl AsRef<Path>,
    format: VectorFormat,
) -> Result<()> {
    for token in model.vocab().tokens() {
        check_label(token)?;
    }
    let set = VectorSet::new(model.vocab().tokens().to_vec(), model.targets().to_owned())?;
    write_vector_set(&set, path, format)
}

fn bundle_file(dir: &Path, stem: &str, format: VectorFormat) -> PathBuf {
    dir.join(format!("{stem}.{}", format.extension()))
}

/// Writes a model as a bundle under `dir`: `targets.<ext>`, `contexts.<ext>`,
/// `sources.<ext>` when present, plus `vocab.tsv` with corpus frequencies.
pub fn save_model(model: &EmbeddingModel, dir: impl AsRef<Path>, format: VectorFormat) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for token in model.vocab().tokens() {
        check_label(token)?;
    }

    let tokens = model.vocab().tokens().to_vec();
    let targets = VectorSet::new(tokens.clone(), model.targets().to_owned())?;
    write_vector_set(&targets, bundle_file(dir, "targets", format), format)?;
    let contexts = VectorSet::new(tokens, model.contexts().to_owned())?;
    write_vector_set(&contexts, bundle_file(dir, "contexts", format), format)?;
    if let Some(sources) = model.sources() {
        for label in sources.labels() {
            check_label(label)?;
        }
        write_vector_set(sources, bundle_file(dir, "sources", format), format)?;
    }

    let vocab_path = dir.join("vocab.tsv");
    let file = File::create(&vocab_path).map_err(|e| Error::io(&vocab_path, e))?;
    let mut w = BufWriter::new(file);
    for (_, token, count) in model.vocab().iter() {
        writeln!(w, "{token}\t{count}").map_err(|e| Error::io(&vocab_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&vocab_path, e))?;
    Ok(())
}

fn read_vocab_tsv(path: &Path) -> Result<Vec<(String, u64)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let (token, count) = line
            .split_once('\t')
            .ok_or_else(|| Error::malformed(path, idx + 1, "expected <token>\\t<count>"))?;
        let count: u64 = count
            .trim()
            .parse()
            .map_err(|_| Error::malformed(path, idx + 1, "bad count"))?;
        out.push((token.to_owned(), count));
    }
    Ok(out)
}

/// Loads a model from `path`.
///
/// A directory is read as a bundle written by [`save_model`] (format detected
/// from which `targets.*` file exists); a plain file is read as a single
/// target-vector file, binary when its extension is `.bin`.
pub fn load_model(path: impl AsRef<Path>) -> Result<EmbeddingModel> {
    let path = path.as_ref();
    if !path.is_dir() {
        return load_vectors(path, VectorFormat::from_path(path));
    }

    let format = [VectorFormat::Binary, VectorFormat::Text]
        .into_iter()
        .find(|f| bundle_file(path, "targets", *f).exists())
        .ok_or_else(|| {
            Error::io(
                path,
                std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    "no targets.bin or targets.txt in model directory",
                ),
            )
        })?;

    let targets = read_vector_set(bundle_file(path, "targets", format), format)?;
    let mut vocab = Vocabulary::from_tokens(targets.labels().to_vec())?;

    let vocab_path = path.join("vocab.tsv");
    if vocab_path.exists() {
        let counted = read_vocab_tsv(&vocab_path)?;
        if counted.len() == vocab.len()
            && counted.iter().map(|(t, _)| t.as_str()).eq(vocab.tokens().iter().map(|s| s.as_str()))
        {
            vocab = Vocabulary::from_counts(counted)?;
        } else {
            return Err(Error::InvalidConfig(format!(
                "{} does not match the token order of the targets file",
                vocab_path.display()
            )));
        }
    }

    let contexts_path = bundle_file(path, "contexts", format);
    let contexts = if contexts_path.exists() {
        let set = read_vector_set(&contexts_path, format)?;
        if set.labels() != targets.labels() {
            return Err(Error::InvalidConfig(
                "contexts file token order differs from targets file".into(),
            ));
        }
        set.matrix().to_owned()
    } else {
        Array2::zeros((targets.len(), targets.dim()))
    };

    let sources_path = bundle_file(path, "sources", format);
    let sources = if sources_path.exists() {
        Some(read_vector_set(&sources_path, format)?)
    } else {
        None
    };

    EmbeddingModel::new(vocab, targets.matrix().to_owned(), contexts, sources)
}
