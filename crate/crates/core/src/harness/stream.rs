use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Location, Task, TaskId, TaskOrigin, Worker, WorkerId};

/// One arriving object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Event {
    Worker(Worker),
    Task(Task),
}

impl Event {
    /// Arrival time: `on_time` for workers, `pub_time` for tasks.
    pub fn time(&self) -> f64 {
        match self {
            Event::Worker(w) => w.on_time,
            Event::Task(s) => s.pub_time,
        }
    }
}

/// Time-ordered arrivals.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventStream {
    pub events: Vec<Event>,
}

pub const STREAM_HEADER: [&str; 7] = ["kind", "id", "t", "x", "y", "extra1", "extra2"];

impl EventStream {
    pub fn new(mut events: Vec<Event>) -> Self {
        events.sort_by(|a, b| a.time().total_cmp(&b.time()));
        EventStream { events }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn workers(&self) -> impl Iterator<Item = &Worker> {
        self.events.iter().filter_map(|e| match e {
            Event::Worker(w) => Some(w),
            Event::Task(_) => None,
        })
    }

    pub fn tasks(&self) -> impl Iterator<Item = &Task> {
        self.events.iter().filter_map(|e| match e {
            Event::Task(s) => Some(s),
            Event::Worker(_) => None,
        })
    }

    pub fn is_sorted(&self) -> bool {
        self.events.windows(2).all(|p| p[0].time() <= p[1].time())
    }

    /// Checks ordering, id uniqueness per kind and entity invariants.
    pub fn check(&self) -> Result<()> {
        let mut wids = std::collections::HashSet::new();
        let mut tids = std::collections::HashSet::new();
        for (i, e) in self.events.iter().enumerate() {
            let bad = |reason: String| Error::Ingestion { record: i, reason };
            if i > 0 && self.events[i - 1].time() > e.time() {
                return Err(bad("events out of time order".into()));
            }
            match e {
                Event::Worker(w) => {
                    w.check().map_err(|err| bad(err.to_string()))?;
                    if !wids.insert(w.id) {
                        return Err(bad(format!("duplicate worker id {}", w.id.0)));
                    }
                }
                Event::Task(s) => {
                    s.check().map_err(|err| bad(err.to_string()))?;
                    if !tids.insert(s.id) {
                        return Err(bad(format!("duplicate task id {}", s.id.0)));
                    }
                }
            }
        }
        Ok(())
    }

    /// CSV with header `kind,id,t,x,y,extra1,extra2`. Workers store reach
    /// and off time in the extras; tasks store the expiration time and
    /// leave the second extra empty. Floats use the shortest exact form.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::format("<stream csv>", e.to_string());
        wtr.write_record(STREAM_HEADER).map_err(err)?;
        for e in &self.events {
            let row = match e {
                Event::Worker(w) => [
                    "worker".to_string(),
                    w.id.0.to_string(),
                    w.on_time.to_string(),
                    w.loc.x.to_string(),
                    w.loc.y.to_string(),
                    w.reach.to_string(),
                    w.off_time.to_string(),
                ],
                Event::Task(s) => [
                    "task".to_string(),
                    s.id.0.to_string(),
                    s.pub_time.to_string(),
                    s.loc.x.to_string(),
                    s.loc.y.to_string(),
                    s.exp_time.to_string(),
                    String::new(),
                ],
            };
            wtr.write_record(&row).map_err(err)?;
        }
        wtr.flush().map_err(|e| Error::io("<stream csv>", e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    /// Parses the CSV form. Rows out of time order are stably sorted with a
    /// warning; malformed rows fail with their 1-based line number.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
        let header = rdr.headers().map_err(|e| Error::Ingestion {
            record: 1,
            reason: e.to_string(),
        })?;
        if header.iter().map(str::trim).ne(STREAM_HEADER) {
            return Err(Error::Ingestion {
                record: 1,
                reason: format!("expected header {}", STREAM_HEADER.join(",")),
            });
        }
        let mut events = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let bad = |reason: String| Error::Ingestion { record: line, reason };
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            if rec.len() != STREAM_HEADER.len() {
                return Err(bad(format!("expected 7 fields, found {}", rec.len())));
            }
            let num = |j: usize| -> Result<f64> {
                let v: f64 = rec[j].trim().parse().map_err(|_| bad(format!("field {} is not a number: {:?}", STREAM_HEADER[j], &rec[j])))?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(bad(format!("field {} is not finite", STREAM_HEADER[j])))
                }
            };
            let id: u64 = rec[1].trim().parse().map_err(|_| bad(format!("bad id {:?}", &rec[1])))?;
            let loc = Location::new(num(3)?, num(4)?);
            let ev = match rec[0].trim() {
                "worker" => {
                    let w = Worker {
                        id: WorkerId(id),
                        loc,
                        reach: num(5)?,
                        on_time: num(2)?,
                        off_time: num(6)?,
                    };
                    w.check().map_err(|e| bad(e.to_string()))?;
                    Event::Worker(w)
                }
                "task" => {
                    let s = Task {
                        id: TaskId(id),
                        loc,
                        pub_time: num(2)?,
                        exp_time: num(5)?,
                        origin: TaskOrigin::Real,
                    };
                    s.check().map_err(|e| bad(e.to_string()))?;
                    Event::Task(s)
                }
                other => return Err(bad(format!("unknown kind {other:?}"))),
            };
            events.push(ev);
        }
        let stream = EventStream { events };
        if stream.is_sorted() {
            Ok(stream)
        } else {
            log::warn!("stream rows are not in time order; sorting");
            Ok(EventStream::new(stream.events))
        }
    }
}

/// Reads a stream file.
pub fn load_stream(path: &Path) -> Result<EventStream> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    EventStream::read_csv(std::io::BufReader::new(f))
}
