//! Plain-text file formats: vectors, frequency sidecars, corpora, analogy
//! sets, word lists and gold annotations.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use embedstab_core::change::GoldData;
use embedstab_core::corpus::{Corpus, SamplingMode};
use embedstab_core::runs::RunSet;
use embedstab_core::{AnalogyDataset, EmbeddingSpace, Vocabulary};
use sha2::{Digest, Sha256};

use crate::error::{Context, Result, ToolError};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| ToolError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| ToolError::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| ToolError::io(path, e))
}

fn lines<'a, R: BufRead + 'a>(
    r: R,
    path: &'a Path,
) -> impl Iterator<Item = Result<(usize, String)>> + 'a {
    r.lines()
        .enumerate()
        .map(move |(i, l)| l.map(|l| (i + 1, l)).map_err(|e| ToolError::io(path, e)))
}

/// Parses the vector text format: a `v d` header, then `v` lines of
/// `word x1 … xd`. `path` is only used in error messages.
pub fn read_vectors(r: impl BufRead, path: &Path) -> Result<EmbeddingSpace> {
    let mut it = lines(r, path);
    let (v, d) = match it.next() {
        Some(l) => {
            let (n, l) = l?;
            let f: Vec<&str> = l.split_whitespace().collect();
            match f.as_slice() {
                [v, d] => match (v.parse::<usize>(), d.parse::<usize>()) {
                    (Ok(v), Ok(d)) if d > 0 => (v, d),
                    _ => return Err(ToolError::parse(path, n, format!("malformed header '{l}'"))),
                },
                _ => return Err(ToolError::parse(path, n, format!("malformed header '{l}'"))),
            }
        }
        None => return Err(ToolError::parse(path, 1, "missing header")),
    };
    let mut words = Vec::with_capacity(v);
    let mut data = Vec::with_capacity(v * d);
    let mut seen = std::collections::HashSet::with_capacity(v);
    for l in it {
        let (n, l) = l?;
        if l.trim().is_empty() {
            continue;
        }
        if words.len() == v {
            return Err(ToolError::parse(path, n, format!("more than {v} rows")));
        }
        let mut f = l.split_whitespace();
        let word = f.next().expect("non-empty line");
        let row: Vec<f64> = f
            .map(|x| {
                x.parse::<f64>()
                    .map_err(|_| ToolError::parse(path, n, format!("bad number '{x}'")))
            })
            .collect::<Result<_>>()?;
        if row.len() != d {
            return Err(ToolError::parse(
                path,
                n,
                format!("expected {d} components, found {}", row.len()),
            ));
        }
        if !seen.insert(word.to_string()) {
            return Err(ToolError::parse(
                path,
                n,
                format!("duplicate word '{word}'"),
            ));
        }
        words.push(word.to_string());
        data.extend(row);
    }
    if words.len() != v {
        return Err(ToolError::parse(
            path,
            v + 1,
            format!("header announces {v} rows, found {}", words.len()),
        ));
    }
    let vocab = Vocabulary::new(words).context(|| path.display().to_string())?;
    EmbeddingSpace::new(vocab, data, d).context(|| path.display().to_string())
}

pub fn load_text_vectors(path: &Path) -> Result<EmbeddingSpace> {
    read_vectors(open(path)?, path)
}

/// Shortest round-trip decimal representation, so save → load is exact.
pub fn write_vectors(space: &EmbeddingSpace, mut w: impl Write) -> std::io::Result<()> {
    writeln!(w, "{} {}", space.len(), space.dim())?;
    let mut line = String::new();
    for (i, word) in space.vocab().words().iter().enumerate() {
        line.clear();
        line.push_str(word);
        for x in space.row(i) {
            write!(line, " {x}").expect("writing to a String");
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()
}

pub fn save_text_vectors(space: &EmbeddingSpace, path: &Path) -> Result<()> {
    write_vectors(space, create(path)?).map_err(|e| ToolError::io(path, e))
}

/// Frequency sidecar next to a vector file: `x.vec` → `x.freq`.
pub fn sidecar_path(vectors: &Path) -> PathBuf {
    vectors.with_extension("freq")
}

/// `word<TAB>count` lines.
pub fn load_frequencies(path: &Path) -> Result<BTreeMap<String, u64>> {
    let mut out = BTreeMap::new();
    for l in lines(open(path)?, path) {
        let (n, l) = l?;
        if l.trim().is_empty() {
            continue;
        }
        let (w, c) = l
            .split_once('\t')
            .ok_or_else(|| ToolError::parse(path, n, "expected word<TAB>count"))?;
        let c: u64 = c
            .trim()
            .parse()
            .map_err(|_| ToolError::parse(path, n, format!("bad count '{c}'")))?;
        if c == 0 {
            return Err(ToolError::parse(
                path,
                n,
                format!("count of '{w}' must be >= 1"),
            ));
        }
        if out.insert(w.to_string(), c).is_some() {
            return Err(ToolError::parse(path, n, format!("duplicate word '{w}'")));
        }
    }
    Ok(out)
}

pub fn save_frequencies(vocab: &Vocabulary, path: &Path) -> Result<()> {
    let freq = vocab
        .frequencies()
        .ok_or_else(|| ToolError::Usage("vocabulary carries no frequencies".into()))?;
    let mut w = create(path)?;
    let io = |e| ToolError::io(path, e);
    for (word, c) in vocab.words().iter().zip(freq) {
        writeln!(w, "{word}\t{c}").map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Attaches counts; every word of the space must be listed.
pub fn attach_frequencies(
    space: &mut EmbeddingSpace,
    counts: &BTreeMap<String, u64>,
    path: &Path,
) -> Result<()> {
    let v: Vec<u64> = space
        .vocab()
        .words()
        .iter()
        .map(|w| {
            counts
                .get(w)
                .copied()
                .ok_or_else(|| ToolError::parse(path, 0, format!("no count for '{w}'")))
        })
        .collect::<Result<_>>()?;
    space
        .vocab_mut()
        .set_frequencies(v)
        .context(|| path.display().to_string())
}

/// Loads vectors and, when a `.freq` sidecar exists, attaches its counts.
pub fn load_vectors_with_sidecar(path: &Path) -> Result<EmbeddingSpace> {
    let mut s = load_text_vectors(path)?;
    let side = sidecar_path(path);
    if side.is_file() {
        let counts = load_frequencies(&side)?;
        attach_frequencies(&mut s, &counts, &side)?;
    }
    Ok(s)
}

fn files_where(dir: &Path, keep: impl Fn(&Path) -> bool) -> Result<Vec<PathBuf>> {
    let rd = std::fs::read_dir(dir).map_err(|e| ToolError::io(dir, e))?;
    let mut files = Vec::new();
    for e in rd {
        let p = e.map_err(|e| ToolError::io(dir, e))?.path();
        if p.is_file() && keep(&p) {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

/// `.vec` files of a directory in file-name order.
pub fn vector_files(dir: &Path) -> Result<Vec<PathBuf>> {
    files_where(dir, |p| p.extension().is_some_and(|x| x == "vec"))
}

/// Epoch corpora: every regular, non-hidden file of a directory in file-name order.
pub fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let files = files_where(dir, |p| {
        !p.file_name()
            .is_some_and(|n| n.to_string_lossy().starts_with('.'))
    })?;
    if files.is_empty() {
        return Err(ToolError::parse(dir, 0, "no corpus files"));
    }
    Ok(files)
}

pub fn load_runset(dir: &Path, mode: SamplingMode) -> Result<(RunSet, Vec<PathBuf>)> {
    let files = vector_files(dir)?;
    if files.is_empty() {
        return Err(ToolError::parse(dir, 0, "no .vec files"));
    }
    let spaces = files
        .iter()
        .map(|f| load_vectors_with_sidecar(f))
        .collect::<Result<Vec<_>>>()?;
    let label = dir.display().to_string();
    let runs = RunSet::new(spaces, mode, label).context(|| dir.display().to_string())?;
    Ok((runs, files))
}

/// One document per line, whitespace-tokenized.
pub fn read_corpus(r: impl BufRead, path: &Path, lowercase: bool) -> Result<Corpus> {
    let ls = lines(r, path)
        .map(|l| l.map(|(_, l)| l))
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus::from_lines(ls, lowercase))
}

pub fn load_corpus(path: &Path, lowercase: bool) -> Result<Corpus> {
    read_corpus(open(path)?, path, lowercase)
}

pub fn save_corpus(corpus: &Corpus, path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| ToolError::io(path, e);
    for d in &corpus.documents {
        writeln!(w, "{}", d.join(" ")).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_lines(path: &Path) -> Result<Vec<String>> {
    lines(open(path)?, path)
        .map(|l| l.map(|(_, l)| l))
        .collect()
}

/// Analogy questions `a b c d`; `#` comments and `: section` headers skipped.
pub fn read_analogies(r: impl BufRead, path: &Path) -> Result<AnalogyDataset> {
    let mut questions = Vec::new();
    for l in lines(r, path) {
        let (n, l) = l?;
        let t = l.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with(':') {
            continue;
        }
        let f: Vec<&str> = t.split_whitespace().collect();
        let [a, b, c, d] = f.as_slice() else {
            return Err(ToolError::parse(
                path,
                n,
                format!("expected 4 words, found {}", f.len()),
            ));
        };
        questions.push([a, b, c, d].map(|s| s.to_string()));
    }
    Ok(AnalogyDataset { questions })
}

pub fn load_analogies(path: &Path) -> Result<AnalogyDataset> {
    read_analogies(open(path)?, path)
}

/// First token of every non-blank, non-comment line.
pub fn load_word_list(path: &Path) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for l in lines(open(path)?, path) {
        let (_, l) = l?;
        if let Some(w) = l.split_whitespace().next().filter(|w| !w.starts_with('#')) {
            out.push(w.to_string());
        }
    }
    Ok(out)
}

fn load_tab_pairs(path: &Path) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for l in lines(open(path)?, path) {
        let (n, l) = l?;
        if l.trim().is_empty() {
            continue;
        }
        let (w, v) = l
            .split_once('\t')
            .ok_or_else(|| ToolError::parse(path, n, "expected word<TAB>value"))?;
        out.push((n, w.to_string(), v.trim().to_string()));
    }
    Ok(out)
}

/// `word<TAB>0|1`.
pub fn load_gold_binary(path: &Path) -> Result<BTreeMap<String, bool>> {
    load_tab_pairs(path)?
        .into_iter()
        .map(|(n, w, v)| match v.as_str() {
            "0" => Ok((w, false)),
            "1" => Ok((w, true)),
            _ => Err(ToolError::parse(
                path,
                n,
                format!("expected 0 or 1, found '{v}'"),
            )),
        })
        .collect()
}

/// `word<TAB>score`.
pub fn load_gold_graded(path: &Path) -> Result<BTreeMap<String, f64>> {
    load_tab_pairs(path)?
        .into_iter()
        .map(|(n, w, v)| match v.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok((w, x)),
            _ => Err(ToolError::parse(path, n, format!("bad score '{v}'"))),
        })
        .collect()
}

pub fn load_gold(binary: Option<&Path>, graded: Option<&Path>) -> Result<GoldData> {
    Ok(GoldData {
        binary: binary
            .map(load_gold_binary)
            .transpose()?
            .unwrap_or_default(),
        graded: graded
            .map(load_gold_graded)
            .transpose()?
            .unwrap_or_default(),
    })
}

/// Task answer files: `word<TAB>value`, one line per word in the given order.
pub fn write_answers<T: std::fmt::Display>(rows: &[(String, T)], path: &Path) -> Result<()> {
    let mut w = create(path)?;
    let io = |e| ToolError::io(path, e);
    for (word, v) in rows {
        writeln!(w, "{word}\t{v}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn write_string(path: &Path, s: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(s.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| ToolError::io(path, e))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let mut f = open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf).map_err(|e| ToolError::io(path, e))?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex(&h.finalize()))
}

fn hex(bytes: &[u8]) -> String {
    bytes
        .iter()
        .fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
            write!(s, "{b:02x}").expect("writing to a String");
            s
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use embedstab_core::rng;

    fn parse(s: &str) -> Result<EmbeddingSpace> {
        read_vectors(s.as_bytes(), Path::new("t.vec"))
    }

    #[test]
    fn parses_small_file() {
        let s = parse("2 3\na 1 0 0\nb 0 1 0\n").unwrap();
        assert_eq!((s.len(), s.dim()), (2, 3));
        assert!(!s.is_normalized());
        assert_eq!(s.vocab().words(), ["a", "b"]);
    }

    #[test]
    fn reports_offending_line() {
        let e = parse("2 3\na 1 0\nb 0 1 0\n").unwrap_err();
        assert!(matches!(e, ToolError::Parse { line: 2, .. }), "{e}");
        let e = parse("2 3\na 1 0 0\na 0 1 0\n").unwrap_err();
        assert!(matches!(e, ToolError::Parse { line: 3, .. }), "{e}");
        assert!(matches!(
            parse("2\n").unwrap_err(),
            ToolError::Parse { line: 1, .. }
        ));
        assert!(matches!(
            parse("x y\n").unwrap_err(),
            ToolError::Parse { line: 1, .. }
        ));
        assert!(parse("3 1\na 1\nb 2\n").is_err());
        assert!(parse("1 1\na 1\nb 2\n").is_err());
        assert!(parse("1 1\na nan_ish\n").is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let mut r = rng::seeded(3);
        let rows: Vec<(String, Vec<f64>)> = (0..10)
            .map(|i| {
                (
                    format!("w{i}"),
                    (0..5).map(|_| rng::normal(&mut r)).collect(),
                )
            })
            .collect();
        let s = EmbeddingSpace::from_rows(rows).unwrap();
        let mut buf = Vec::new();
        write_vectors(&s, &mut buf).unwrap();
        let back = parse(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.vocab().words(), s.vocab().words());
        assert_eq!(back.data(), s.data());
        let n = s.normalize().unwrap();
        buf.clear();
        write_vectors(&n, &mut buf).unwrap();
        let back = parse(std::str::from_utf8(&buf).unwrap()).unwrap();
        for i in 0..back.len() {
            let norm: f64 = back.row(i).iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn empty_space_writes_only_header() {
        let s = EmbeddingSpace::new(Vocabulary::default(), vec![], 4).unwrap();
        let mut buf = Vec::new();
        write_vectors(&s, &mut buf).unwrap();
        assert_eq!(buf, b"0 4\n");
        assert_eq!(parse("0 4\n").unwrap().len(), 0);
    }

    #[test]
    fn analogy_format() {
        let d = read_analogies(
            ": capital\n# c\na b c d\n\ne f g h\n".as_bytes(),
            Path::new("a.txt"),
        )
        .unwrap();
        assert_eq!(d.questions.len(), 2);
        assert_eq!(d.questions[1], ["e", "f", "g", "h"].map(String::from));
        assert!(read_analogies("a b c\n".as_bytes(), Path::new("a.txt")).is_err());
    }

    #[test]
    fn digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
