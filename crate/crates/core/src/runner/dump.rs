//! Frame files: raw little-endian f32 records plus a text sidecar.
//!
//! `fill_00000100.f32` holds `width * height * components` floats; the
//! sidecar `fill_00000100.txt` reads
//!
//! ```text
//! field = fill
//! iteration = 100
//! width = 60
//! height = 40
//! components = 1
//! format = f32le
//! ```

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::thread::JoinHandle;

use crossbeam_channel::Sender;

use crate::engine::Frame;

/// Header of a dumped frame.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FrameHeader {
    pub field: String,
    pub iteration: u64,
    pub width: u32,
    pub height: u32,
    pub components: u32,
}

impl FrameHeader {
    pub fn stem(&self) -> String {
        format!("{}_{:08}", self.field, self.iteration)
    }

    pub fn len(&self) -> usize {
        self.width as usize * self.height as usize * self.components as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn sidecar(&self) -> String {
        format!(
            "field = {}\niteration = {}\nwidth = {}\nheight = {}\ncomponents = {}\nformat = f32le\n",
            self.field, self.iteration, self.width, self.height, self.components
        )
    }

    fn parse_sidecar(text: &str) -> io::Result<Self> {
        let bad = |m: String| io::Error::new(io::ErrorKind::InvalidData, m);
        let get = |key: &str| -> io::Result<String> {
            text.lines()
                .filter_map(|l| l.split_once('='))
                .find(|(k, _)| k.trim() == key)
                .map(|(_, v)| v.trim().to_string())
                .ok_or_else(|| bad(format!("sidecar lacks `{key}`")))
        };
        let num = |s: String| s.parse().map_err(|_| bad(format!("bad number `{s}`")));
        if get("format")? != "f32le" {
            return Err(bad("unsupported format".into()));
        }
        Ok(FrameHeader {
            field: get("field")?,
            iteration: get("iteration")?
                .parse()
                .map_err(|_| bad("bad iteration".into()))?,
            width: num(get("width")?)?,
            height: num(get("height")?)?,
            components: num(get("components")?)?,
        })
    }
}

/// Writes `<stem>.f32` and `<stem>.txt` into `dir`; returns the data path.
pub fn write_frame_files(dir: &Path, header: &FrameHeader, data: &[f32]) -> io::Result<PathBuf> {
    if data.len() != header.len() {
        return Err(io::Error::new(
            io::ErrorKind::InvalidInput,
            format!("{} floats for a {} float frame", data.len(), header.len()),
        ));
    }
    let stem = header.stem();
    let path = dir.join(format!("{stem}.f32"));
    let mut w = BufWriter::new(fs::File::create(&path)?);
    for v in data {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    fs::write(dir.join(format!("{stem}.txt")), header.sidecar())?;
    Ok(path)
}

/// Reads a dumped frame given the path of either of its two files.
pub fn read_frame(path: &Path) -> io::Result<(FrameHeader, Vec<f32>)> {
    let header = FrameHeader::parse_sidecar(&fs::read_to_string(path.with_extension("txt"))?)?;
    let bytes = fs::read(path.with_extension("f32"))?;
    if bytes.len() != header.len() * 4 {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("expected {} bytes, found {}", header.len() * 4, bytes.len()),
        ));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    Ok((header, data))
}

/// CSV with one line per record: `i,j,c0,c1,...` where `i` runs along
/// the width.
pub fn write_csv(out: &mut dyn Write, header: &FrameHeader, data: &[f32]) -> io::Result<()> {
    write!(out, "i,j")?;
    for c in 0..header.components {
        write!(out, ",c{c}")?;
    }
    writeln!(out)?;
    let comps = header.components.max(1) as usize;
    for (r, rec) in data.chunks(comps).enumerate() {
        let w = header.width.max(1) as usize;
        write!(out, "{},{}", r % w, r / w)?;
        for v in rec {
            write!(out, ",{v}")?;
        }
        writeln!(out)?;
    }
    Ok(())
}

enum Payload {
    Shared(Arc<Frame>),
    Owned(Vec<f32>),
}

struct Job {
    header: FrameHeader,
    payload: Payload,
}

/// Writes frames on a background thread so the stepping thread only
/// hands off a pointer.
pub struct FrameDump {
    tx: Option<Sender<Job>>,
    worker: Option<JoinHandle<io::Result<usize>>>,
}

impl FrameDump {
    pub fn create(dir: &Path) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        let dir = dir.to_path_buf();
        let (tx, rx) = crossbeam_channel::unbounded::<Job>();
        let worker = std::thread::Builder::new()
            .name("frame-dump".into())
            .spawn(move || {
                let mut written = 0;
                for job in rx {
                    let data = match &job.payload {
                        Payload::Shared(f) => &f.rendered.data[..],
                        Payload::Owned(v) => &v[..],
                    };
                    write_frame_files(&dir, &job.header, data)?;
                    written += 1;
                }
                Ok(written)
            })?;
        Ok(FrameDump {
            tx: Some(tx),
            worker: Some(worker),
        })
    }

    pub fn submit_frame(&self, frame: Arc<Frame>) {
        let [width, height, components] = frame.dims();
        let header = FrameHeader {
            field: frame.field.name().to_string(),
            iteration: frame.iteration,
            width,
            height,
            components,
        };
        self.send(Job {
            header,
            payload: Payload::Shared(frame),
        });
    }

    pub fn submit(&self, header: FrameHeader, data: Vec<f32>) {
        self.send(Job {
            header,
            payload: Payload::Owned(data),
        });
    }

    fn send(&self, job: Job) {
        if let Some(tx) = &self.tx {
            // A failed send means the worker hit an I/O error; finish() reports it.
            let _ = tx.send(job);
        }
    }

    /// Waits for pending writes; returns the number of frames written.
    pub fn finish(mut self) -> io::Result<usize> {
        self.tx.take();
        match self.worker.take().map(|w| w.join()) {
            Some(Ok(r)) => r,
            Some(Err(_)) => Err(io::Error::other("frame writer panicked")),
            None => Ok(0),
        }
    }
}

impl Drop for FrameDump {
    fn drop(&mut self) {
        self.tx.take();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}
