//! On-disk form of a synthetic world, loadable by batch runs.
//!
//! ```text
//! manifest.tsv          url  status  content_type  file
//! content/NNNNNN        response bodies
//! changes/schedule.tsv  file  at_ms
//! changes/NNNN.xml      changes documents
//! labels.tsv            url  label        (every site)
//! blogs.tsv             url  label        (every blog home)
//! external.txt          referenced URLs that are not sites
//! registry.txt stoplist.txt topic.txt background.txt glossary.txt config.conf
//! ```

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Duration;

use super::{Label, PingDocument, Site, SyntheticWorld};
use crate::phrases::StopList;

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path} line {line}: {message}")]
    Format { path: String, line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> FixtureError + '_ {
    move |source| FixtureError::Io { path: path.display().to_string(), source }
}

fn write(path: PathBuf, contents: impl AsRef<[u8]>) -> Result<(), FixtureError> {
    fs::write(&path, contents).map_err(io_err(&path))
}

fn read(path: PathBuf) -> Result<String, FixtureError> {
    fs::read_to_string(&path).map_err(io_err(&path))
}

fn lines_of<T: AsRef<str>>(items: &[T]) -> String {
    items.iter().map(|s| format!("{}\n", s.as_ref())).collect()
}

/// Writes `world` under `dir`, which is created if needed.
pub fn materialize(world: &SyntheticWorld, dir: &Path) -> Result<(), FixtureError> {
    for sub in ["content", "changes"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(io_err(&p))?;
    }
    let mut manifest = String::new();
    for (i, (url, site)) in world.sites.iter().enumerate() {
        let file = format!("content/{i:06}");
        manifest.push_str(&format!("{url}\t{}\t{}\t{file}\n", site.status, site.content_type));
        write(dir.join(&file), &site.body)?;
    }
    write(dir.join("manifest.tsv"), manifest)?;

    let mut schedule = String::new();
    for (i, doc) in world.ping_script.iter().enumerate() {
        let file = format!("{i:04}.xml");
        schedule.push_str(&format!("{file}\t{}\n", doc.at.as_millis()));
        write(dir.join("changes").join(&file), &doc.body)?;
    }
    write(dir.join("changes/schedule.tsv"), schedule)?;

    let labels: String = world.labels.iter().map(|(u, l)| format!("{u}\t{l}\n")).collect();
    write(dir.join("labels.tsv"), labels)?;
    let blogs: String = world.blog_labels.iter().map(|(u, l)| format!("{u}\t{l}\n")).collect();
    write(dir.join("blogs.tsv"), blogs)?;
    write(dir.join("external.txt"), lines_of(&world.external.iter().collect::<Vec<_>>()))?;
    write(dir.join("registry.txt"), lines_of(&world.registry))?;
    write(dir.join("stoplist.txt"), StopList::english_source())?;
    write(dir.join("topic.txt"), lines_of(&world.topic_corpus))?;
    write(dir.join("background.txt"), lines_of(&world.background_corpus))?;
    write(dir.join("glossary.txt"), lines_of(&world.glossary))?;
    write(
        dir.join("config.conf"),
        "# batch run over this fixture; paths are relative to this file\n\
         mode = batch\nfixture = .\nregistry_path = registry.txt\nstoplist_path = stoplist.txt\n\
         topic_corpus_path = topic.txt\nbackground_corpus_path = background.txt\nglossary_path = glossary.txt\n\
         classifier = vsm\nthreshold = 0.3\nmax_pages = 100\nsummary_workers = 4\nfetch_workers = 4\n\
         queue_capacity = 256\nreport_interval = 60\nrng_seed = 0\n",
    )?;
    Ok(())
}

fn tsv<'a>(text: &'a str, path: &Path, fields: usize) -> Result<Vec<(usize, Vec<&'a str>)>, FixtureError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != fields {
            return Err(FixtureError::Format {
                path: path.display().to_string(),
                line: i + 1,
                message: format!("expected {fields} fields, got {}", f.len()),
            });
        }
        out.push((i + 1, f));
    }
    Ok(out)
}

pub fn load_fixture(dir: &Path) -> Result<SyntheticWorld, FixtureError> {
    let bad = |path: &Path, line: usize, message: String| FixtureError::Format { path: path.display().to_string(), line, message };
    let mut world = SyntheticWorld::default();

    let path = dir.join("manifest.tsv");
    let text = read(path.clone())?;
    for (line, f) in tsv(&text, &path, 4)? {
        let status = f[1].parse().map_err(|_| bad(&path, line, format!("bad status {:?}", f[1])))?;
        let file = dir.join(f[3]);
        let body = fs::read(&file).map_err(io_err(&file))?;
        world.sites.insert(f[0].to_string(), Site { status, content_type: f[2].to_string(), body });
    }

    let path = dir.join("changes/schedule.tsv");
    let text = read(path.clone())?;
    for (line, f) in tsv(&text, &path, 2)? {
        let ms: u64 = f[1].parse().map_err(|_| bad(&path, line, format!("bad time {:?}", f[1])))?;
        let body = read(dir.join("changes").join(f[0]))?;
        world.ping_script.push(PingDocument { at: Duration::from_millis(ms), body });
    }

    for (name, target) in [("labels.tsv", &mut world.labels), ("blogs.tsv", &mut world.blog_labels)] {
        let path = dir.join(name);
        let text = read(path.clone())?;
        for (line, f) in tsv(&text, &path, 2)? {
            let label: Label = f[1].parse().map_err(|e| bad(&path, line, e))?;
            target.insert(f[0].to_string(), label);
        }
    }
    let nonempty = |s: String| s.lines().filter(|l| !l.trim().is_empty()).map(String::from).collect::<Vec<_>>();
    world.external = nonempty(read(dir.join("external.txt"))?).into_iter().collect();
    world.registry = nonempty(read(dir.join("registry.txt"))?);
    world.topic_corpus = nonempty(read(dir.join("topic.txt"))?);
    world.background_corpus = nonempty(read(dir.join("background.txt"))?);
    world.glossary = nonempty(read(dir.join("glossary.txt"))?);
    Ok(world)
}
