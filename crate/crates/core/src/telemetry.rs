//! Session-log ingestion and the sparse access-frequency rating matrix.
//!
//! A session log has one server-side interaction per line:
//!
//! ```text
//! session_id,user_id,form:control:action
//! ```
//!
//! Consecutive lines sharing a session id form one [`Session`]. Interactions
//! are mapped to components (methods) through a [`ComponentMap`] and tallied
//! per user into a [`RatingMatrix`], whose missing cells mean "never used".

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::{BufRead, Read, Write};
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexSet;

use crate::table;
use crate::{Error, Result};

/// One server-side interaction, `form:control:action`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Interaction {
    pub form: String,
    pub control: String,
    pub action: String,
}

impl Interaction {
    pub fn new(form: &str, control: &str, action: &str) -> Result<Self> {
        for (what, part) in [("form", form), ("control", control), ("action", action)] {
            if part.is_empty() {
                return Err(Error::Invalid(format!("interaction {what} is empty")));
            }
            if part.contains(':') || part.contains(',') {
                return Err(Error::Invalid(format!(
                    "interaction {what} `{part}` contains a separator"
                )));
            }
        }
        Ok(Self {
            form: form.to_string(),
            control: control.to_string(),
            action: action.to_string(),
        })
    }

    /// The textual key used by component maps.
    pub fn key(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Interaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.form, self.control, self.action)
    }
}

impl FromStr for Interaction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::Invalid(format!(
                "interaction `{s}` must have exactly two `:` separators"
            )));
        }
        Interaction::new(parts[0], parts[1], parts[2])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Session {
    pub session_id: String,
    pub user_id: String,
    pub interactions: Vec<Interaction>,
}

/// Parses a session log. Blank lines and `#` comment lines are skipped.
pub fn parse_session_log<R: BufRead>(input: R, source_name: &str) -> Result<Vec<Session>> {
    let mut sessions: Vec<Session> = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line.map_err(|e| Error::io(source_name, e))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                source_name,
                line_no,
                format!("expected 3 fields, found {}", fields.len()),
            ));
        }
        let (session_id, user_id) = (fields[0], fields[1]);
        if session_id.is_empty() || user_id.is_empty() {
            return Err(Error::parse(
                source_name,
                line_no,
                "empty session or user id",
            ));
        }
        let interaction: Interaction = fields[2]
            .parse()
            .map_err(|e: Error| Error::parse(source_name, line_no, e.to_string()))?;

        match sessions.last_mut() {
            Some(last) if last.session_id == session_id => {
                if last.user_id != user_id {
                    return Err(Error::parse(
                        source_name,
                        line_no,
                        format!(
                            "session `{session_id}` switches user from `{}` to `{user_id}`",
                            last.user_id
                        ),
                    ));
                }
                last.interactions.push(interaction);
            }
            _ => sessions.push(Session {
                session_id: session_id.to_string(),
                user_id: user_id.to_string(),
                interactions: vec![interaction],
            }),
        }
    }
    Ok(sessions)
}

pub fn read_session_log(path: &Path) -> Result<Vec<Session>> {
    parse_session_log(table::open(path)?, &path.display().to_string())
}

pub fn write_session_log<W: Write>(mut out: W, seed: u64, sessions: &[Session]) -> Result<()> {
    let io = |e| Error::io("session log", e);
    out.write_all(table::header_line(seed).as_bytes())
        .map_err(io)?;
    for s in sessions {
        for i in &s.interactions {
            writeln!(out, "{},{},{}", s.session_id, s.user_id, i).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

/// Interaction key → component id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ComponentMap {
    entries: HashMap<String, String>,
}

impl ComponentMap {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a mapping; fails on a duplicate key.
    pub fn insert(&mut self, interaction: &Interaction, component_id: &str) -> Result<()> {
        if component_id.is_empty() {
            return Err(Error::Invalid("empty component id".into()));
        }
        let key = interaction.key();
        if self.entries.contains_key(&key) {
            return Err(Error::Invalid(format!("duplicate interaction key `{key}`")));
        }
        self.entries.insert(key, component_id.to_string());
        Ok(())
    }

    pub fn get(&self, interaction: &Interaction) -> Option<&str> {
        self.entries.get(&interaction.key()).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Reads `interaction_key,component_id` rows after a required header.
    pub fn read_csv<R: Read>(input: R, source_name: &str) -> Result<Self> {
        let mut rdr = table::reader(input, true);
        let headers = rdr
            .headers()
            .map_err(|e| table::csv_error(source_name, e))?
            .clone();
        if headers.len() != 2 || &headers[0] != "interaction_key" || &headers[1] != "component_id" {
            return Err(Error::parse(
                source_name,
                table::line_of(&headers).max(1),
                "header must be `interaction_key,component_id`",
            ));
        }
        let mut map = ComponentMap::new();
        for record in rdr.records() {
            let record = record.map_err(|e| table::csv_error(source_name, e))?;
            let line = table::line_of(&record);
            if record.len() != 2 {
                return Err(Error::parse(source_name, line, "expected 2 fields"));
            }
            let interaction: Interaction = record[0]
                .parse()
                .map_err(|e: Error| Error::parse(source_name, line, e.to_string()))?;
            map.insert(&interaction, &record[1])
                .map_err(|e| Error::parse(source_name, line, e.to_string()))?;
        }
        Ok(map)
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::read_csv(table::open(path)?, &path.display().to_string())
    }

    /// Writes rows sorted by key so the output is deterministic.
    pub fn write_csv<W: Write>(&self, mut out: W, seed: u64) -> Result<()> {
        out.write_all(table::header_line(seed).as_bytes())
            .map_err(|e| Error::io("component map", e))?;
        let mut wtr = table::writer(out);
        let name = "component map";
        wtr.write_record(["interaction_key", "component_id"])
            .map_err(|e| table::write_error(name, e))?;
        let sorted: BTreeMap<_, _> = self.entries.iter().collect();
        for (k, v) in sorted {
            wtr.write_record([k, v])
                .map_err(|e| table::write_error(name, e))?;
        }
        wtr.flush().map_err(|e| Error::io(name, e))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UsageEvent {
    pub user_id: String,
    pub component_id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MappedEvents {
    pub events: Vec<UsageEvent>,
    pub unmapped: usize,
}

/// Maps every interaction through `map`; unmapped interactions are counted, not fatal.
pub fn map_interactions(sessions: &[Session], map: &ComponentMap) -> MappedEvents {
    let mut mapped = MappedEvents::default();
    for session in sessions {
        for interaction in &session.interactions {
            match map.get(interaction) {
                Some(component) => mapped.events.push(UsageEvent {
                    user_id: session.user_id.clone(),
                    component_id: component.to_string(),
                }),
                None => mapped.unmapped += 1,
            }
        }
    }
    mapped
}

/// Sparse user × component access counts. Stored counts are always ≥ 1; an
/// absent cell is "not used".
///
/// Equality compares observed cells by id. Axis order is first-appearance
/// order, which a triplet file cannot always reproduce.
#[derive(Debug, Clone, Default)]
pub struct RatingMatrix {
    users: IndexSet<String>,
    components: IndexSet<String>,
    cells: BTreeMap<(usize, usize), u32>,
}

impl RatingMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a user without ratings; returns its index.
    pub fn add_user(&mut self, user_id: &str) -> usize {
        self.users.insert_full(user_id.to_string()).0
    }

    /// Registers a component without ratings; returns its index.
    pub fn add_component(&mut self, component_id: &str) -> usize {
        self.components.insert_full(component_id.to_string()).0
    }

    /// Adds `count` to cell (user, component), registering unknown axes.
    pub fn record(&mut self, user_id: &str, component_id: &str, count: u32) {
        if count == 0 {
            return;
        }
        let u = self.add_user(user_id);
        let c = self.add_component(component_id);
        *self.cells.entry((u, c)).or_insert(0) += count;
    }

    pub fn users(&self) -> &IndexSet<String> {
        &self.users
    }

    pub fn components(&self) -> &IndexSet<String> {
        &self.components
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.users.is_empty() || self.components.is_empty()
    }

    /// Count for (user, component) by index; `None` means missing.
    pub fn get(&self, user: usize, component: usize) -> Option<u32> {
        self.cells.get(&(user, component)).copied()
    }

    pub fn get_by_id(&self, user_id: &str, component_id: &str) -> Option<u32> {
        let u = self.users.get_index_of(user_id)?;
        let c = self.components.get_index_of(component_id)?;
        self.get(u, c)
    }

    /// Observed cells as `(user, component, count)` in (user, component) index order.
    pub fn observed(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.cells.iter().map(|(&(u, c), &n)| (u, c, n))
    }

    pub fn observed_count(&self) -> usize {
        self.cells.len()
    }

    pub fn total(&self) -> u64 {
        self.cells.values().map(|&n| n as u64).sum()
    }

    /// Every count multiplied by `k` (k ≥ 1).
    pub fn scaled(&self, k: u32) -> Self {
        let mut out = self.clone();
        for v in out.cells.values_mut() {
            *v *= k.max(1);
        }
        out
    }

    /// Reads `user_id,component_id,count` triplets after a required header.
    pub fn read_csv<R: Read>(input: R, source_name: &str) -> Result<Self> {
        let mut rdr = table::reader(input, true);
        let headers = rdr
            .headers()
            .map_err(|e| table::csv_error(source_name, e))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["user_id", "component_id", "count"] {
            return Err(Error::parse(
                source_name,
                table::line_of(&headers).max(1),
                "header must be `user_id,component_id,count`",
            ));
        }
        let mut m = RatingMatrix::new();
        for record in rdr.records() {
            let record = record.map_err(|e| table::csv_error(source_name, e))?;
            let line = table::line_of(&record);
            if record.len() != 3 {
                return Err(Error::parse(source_name, line, "expected 3 fields"));
            }
            let count: u32 = record[2].parse().map_err(|_| {
                Error::parse(source_name, line, format!("bad count `{}`", &record[2]))
            })?;
            if count == 0 {
                return Err(Error::parse(
                    source_name,
                    line,
                    "zero counts are not stored",
                ));
            }
            if record[0].is_empty() || record[1].is_empty() {
                return Err(Error::parse(source_name, line, "empty id"));
            }
            if m.get_by_id(&record[0], &record[1]).is_some() {
                return Err(Error::parse(source_name, line, "duplicate cell"));
            }
            m.record(&record[0], &record[1], count);
        }
        Ok(m)
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        Self::read_csv(table::open(path)?, &path.display().to_string())
    }

    pub fn write_csv<W: Write>(&self, mut out: W, seed: u64) -> Result<()> {
        let name = "rating matrix";
        out.write_all(table::header_line(seed).as_bytes())
            .map_err(|e| Error::io(name, e))?;
        let mut wtr = table::writer(out);
        wtr.write_record(["user_id", "component_id", "count"])
            .map_err(|e| table::write_error(name, e))?;
        for (u, c, n) in self.observed() {
            wtr.write_record([&self.users[u], &self.components[c], &n.to_string()])
                .map_err(|e| table::write_error(name, e))?;
        }
        wtr.flush().map_err(|e| Error::io(name, e))
    }
}

impl PartialEq for RatingMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.cells.len() == other.cells.len()
            && self
                .observed()
                .all(|(u, c, n)| other.get_by_id(&self.users[u], &self.components[c]) == Some(n))
    }
}

impl Eq for RatingMatrix {}

/// Tallies events per (user, component); axes follow first appearance.
pub fn build_rating_matrix(events: &[UsageEvent]) -> RatingMatrix {
    let mut m = RatingMatrix::new();
    for e in events {
        m.record(&e.user_id, &e.component_id, 1);
    }
    m
}
