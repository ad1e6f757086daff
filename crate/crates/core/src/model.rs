//! Domain types and ingestion of survey ratings and rank tables.
//!
//! CSV is the canonical interchange format. JSON input is an array of flat
//! objects carrying exactly the CSV columns, one object per CSV row.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lowest admissible Likert score.
pub const SCORE_MIN: i64 = 1;
/// Highest admissible Likert score.
pub const SCORE_MAX: i64 = 10;

pub const RATINGS_HEADER: [&str; 4] = ["expert_id", "concept_id", "criterion", "score"];
pub const RANKS_HEADER: [&str; 6] = [
    "expert_id",
    "expert_rank",
    "criterion",
    "criterion_rank",
    "item_id",
    "item_rank",
];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("line {line}: malformed row: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: score {score} outside [{SCORE_MIN}, {SCORE_MAX}]")]
    ScoreOutOfRange { line: usize, score: i64 },
    #[error("line {line}: duplicate rating for expert {expert_id}, concept {concept_id}, criterion {criterion}")]
    DuplicateTriple {
        line: usize,
        expert_id: u32,
        concept_id: u32,
        criterion: CriterionId,
    },
    #[error("missing rating cells (concept, criterion): {}", format_cells(.missing))]
    MissingCell { missing: Vec<(u32, CriterionId)> },
    #[error("expert {expert_id}: {detail}")]
    NonPermutation { expert_id: u32, detail: String },
    #[error("line {line}: unknown item {item}")]
    UnknownItem { line: usize, item: ItemId },
    #[error("line {line}: unknown criterion {criterion}")]
    UnknownCriterion { line: usize, criterion: String },
    #[error("input contains no rows")]
    Empty,
    #[error("rating matrix: {0}")]
    InvalidMatrix(String),
    #[error("read error: {0}")]
    Io(String),
}

fn format_cells(cells: &[(u32, CriterionId)]) -> String {
    cells
        .iter()
        .map(|(c, k)| format!("({c}, {k})"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub type Result<T, E = ModelError> = std::result::Result<T, E>;

/// Interchange format of an input file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    /// Picks the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

/// Code of a rating or evaluation criterion, e.g. `TS` or `Efficacy`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CriterionId(String);

impl CriterionId {
    pub fn new(code: impl Into<String>) -> Self {
        CriterionId(code.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CriterionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for CriterionId {
    fn from(s: &str) -> Self {
        CriterionId::new(s)
    }
}

/// Identifier of a prioritized item (a factor).
///
/// Ordering is natural: `F2 < F10`, so runs of ASCII digits compare by value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ItemId(String);

impl ItemId {
    pub fn new(id: impl Into<String>) -> Self {
        ItemId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ItemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for ItemId {
    fn from(s: &str) -> Self {
        ItemId::new(s)
    }
}

impl Ord for ItemId {
    fn cmp(&self, other: &Self) -> Ordering {
        natural_cmp(&self.0, &other.0)
    }
}

impl PartialOrd for ItemId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (mut a, mut b) = (a.as_bytes(), b.as_bytes());
    loop {
        match (a.first(), b.first()) {
            (None, None) => return Ordering::Equal,
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(x), Some(y)) if x.is_ascii_digit() && y.is_ascii_digit() => {
                let na = a.iter().take_while(|c| c.is_ascii_digit()).count();
                let nb = b.iter().take_while(|c| c.is_ascii_digit()).count();
                let (da, db) = (trim_zeros(&a[..na]), trim_zeros(&b[..nb]));
                let ord = da.len().cmp(&db.len()).then_with(|| da.cmp(db)).then(na.cmp(&nb));
                if ord != Ordering::Equal {
                    return ord;
                }
                a = &a[na..];
                b = &b[nb..];
            }
            (Some(x), Some(y)) => {
                if x != y {
                    return x.cmp(y);
                }
                a = &a[1..];
                b = &b[1..];
            }
        }
    }
}

fn trim_zeros(d: &[u8]) -> &[u8] {
    let start = d.iter().position(|&c| c != b'0').unwrap_or(d.len());
    &d[start..]
}

/// A declared criterion universe. An open set accepts any code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CriterionSet {
    declared: Option<Vec<(CriterionId, String)>>,
}

impl CriterionSet {
    /// The five NIST safeguard criteria used for clustering ratings.
    pub fn nist() -> Self {
        Self::declared([
            ("AS", "Administrative safeguards"),
            ("PS", "Physical safeguards"),
            ("TS", "Technical safeguards"),
            ("OR", "Organizational requirements"),
            ("PPR", "Policy and procedure requirements"),
        ])
    }

    /// The three evaluation criteria used for prioritization.
    pub fn evaluation() -> Self {
        Self::declared([("Ease", "Ease"), ("Efficacy", "Efficacy"), ("Cost", "Cost")])
    }

    pub fn open() -> Self {
        CriterionSet { declared: None }
    }

    pub fn declared<'a>(codes: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        CriterionSet {
            declared: Some(
                codes
                    .into_iter()
                    .map(|(c, l)| (CriterionId::new(c), l.to_string()))
                    .collect(),
            ),
        }
    }

    pub fn is_open(&self) -> bool {
        self.declared.is_none()
    }

    pub fn contains(&self, code: &str) -> bool {
        match &self.declared {
            None => true,
            Some(d) => d.iter().any(|(c, _)| c.as_str() == code),
        }
    }

    pub fn label(&self, code: &CriterionId) -> Option<&str> {
        self.declared
            .as_ref()?
            .iter()
            .find(|(c, _)| c == code)
            .map(|(_, l)| l.as_str())
    }

    /// Orders the given codes: declared order for a declared set, lexicographic otherwise.
    pub fn order(&self, present: &BTreeSet<CriterionId>) -> Vec<CriterionId> {
        match &self.declared {
            None => present.iter().cloned().collect(),
            Some(d) => d
                .iter()
                .map(|(c, _)| c)
                .filter(|c| present.contains(*c))
                .cloned()
                .collect(),
        }
    }
}

/// One of the bundled key concepts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Concept {
    pub id: u32,
    pub notation: String,
    pub name: String,
    pub description: String,
}

const CONCEPTS_JSON: &str = include_str!("../data/concepts.json");

/// The twenty bundled key concepts, ordered by id.
pub fn concepts() -> Vec<Concept> {
    serde_json::from_str(CONCEPTS_JSON).expect("bundled concepts.json is valid")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyRecord {
    pub expert_id: u32,
    pub concept_id: u32,
    pub criterion: CriterionId,
    pub score: u8,
}

/// Concept × criterion matrix of expert-averaged Likert scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingMatrix {
    concept_ids: Vec<u32>,
    criteria: Vec<CriterionId>,
    values: Vec<Vec<f64>>,
}

impl RatingMatrix {
    pub fn new(
        concept_ids: Vec<u32>,
        criteria: Vec<CriterionId>,
        values: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if values.len() != concept_ids.len() {
            return Err(ModelError::InvalidMatrix(format!(
                "{} rows for {} concepts",
                values.len(),
                concept_ids.len()
            )));
        }
        for (row, id) in values.iter().zip(&concept_ids) {
            if row.len() != criteria.len() {
                return Err(ModelError::InvalidMatrix(format!(
                    "concept {id}: {} values for {} criteria",
                    row.len(),
                    criteria.len()
                )));
            }
            if let Some(v) = row
                .iter()
                .find(|v| !(SCORE_MIN as f64..=SCORE_MAX as f64).contains(*v))
            {
                return Err(ModelError::InvalidMatrix(format!(
                    "concept {id}: value {v} outside the Likert range"
                )));
            }
        }
        Ok(RatingMatrix {
            concept_ids,
            criteria,
            values,
        })
    }

    pub fn concept_ids(&self) -> &[u32] {
        &self.concept_ids
    }

    pub fn criteria(&self) -> &[CriterionId] {
        &self.criteria
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.values.len()
    }

    pub fn n_cols(&self) -> usize {
        self.criteria.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[j]).collect()
    }
}

/// One expert's ordinal input for prioritization.
///
/// `item_ranks[c][r]` is the item placed at rank `r + 1` under criterion `c`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankProfile {
    pub expert_id: u32,
    pub expert_rank: u32,
    pub criterion_ranks: BTreeMap<CriterionId, u32>,
    pub item_ranks: BTreeMap<CriterionId, Vec<ItemId>>,
}

impl RankProfile {
    /// Checks the permutation invariants: criterion ranks are exactly
    /// `1..=n` and every per-criterion ranking orders the same item set.
    pub fn validate(&self) -> Result<()> {
        let non_perm = |detail: String| ModelError::NonPermutation {
            expert_id: self.expert_id,
            detail,
        };
        if self.expert_rank == 0 {
            return Err(non_perm("expert rank must be at least 1".into()));
        }
        let mut ranks: Vec<u32> = self.criterion_ranks.values().copied().collect();
        ranks.sort_unstable();
        if !ranks.iter().copied().eq(1..=ranks.len() as u32) {
            return Err(non_perm(format!(
                "criterion ranks {ranks:?} are not a permutation of 1..={}",
                ranks.len()
            )));
        }
        let rank_keys: BTreeSet<_> = self.criterion_ranks.keys().collect();
        let item_keys: BTreeSet<_> = self.item_ranks.keys().collect();
        if rank_keys != item_keys {
            return Err(non_perm("ranked criteria differ from criteria with item rankings".into()));
        }
        let mut reference: Option<BTreeSet<&ItemId>> = None;
        for (criterion, order) in &self.item_ranks {
            let set: BTreeSet<&ItemId> = order.iter().collect();
            if set.len() != order.len() || order.is_empty() {
                return Err(non_perm(format!("{criterion}: item ranking repeats an item")));
            }
            match &reference {
                None => reference = Some(set),
                Some(r) if *r != set => {
                    return Err(non_perm(format!("{criterion}: item set differs across criteria")))
                }
                Some(_) => {}
            }
        }
        Ok(())
    }

    pub fn items(&self) -> BTreeSet<ItemId> {
        self.item_ranks
            .values()
            .flat_map(|v| v.iter().cloned())
            .collect()
    }
}

// Raw rows as (source line, column -> text); shared by the CSV and JSON readers.
type RawRow = (usize, BTreeMap<String, String>);

fn read_to_string(mut source: impl Read) -> Result<String> {
    let mut bytes = Vec::new();
    source
        .read_to_end(&mut bytes)
        .map_err(|e| ModelError::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| ModelError::MalformedRow {
        line: 0,
        reason: format!("input is not UTF-8: {e}"),
    })
}

fn read_raw_rows(source: impl Read, format: Format, header: &[&str]) -> Result<Vec<RawRow>> {
    let text = read_to_string(source)?;
    let rows = match format {
        Format::Csv => read_csv_rows(&text, header)?,
        Format::Json => read_json_rows(&text, header)?,
    };
    if rows.is_empty() {
        return Err(ModelError::Empty);
    }
    Ok(rows)
}

fn read_csv_rows(text: &str, header: &[&str]) -> Result<Vec<RawRow>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let found = reader
        .headers()
        .map_err(|e| ModelError::MalformedRow {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    let mut positions = Vec::with_capacity(header.len());
    for col in header {
        let pos = found
            .iter()
            .position(|h| h == *col)
            .ok_or_else(|| ModelError::MalformedRow {
                line: 1,
                reason: format!("header lacks column `{col}`"),
            })?;
        positions.push(pos);
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| ModelError::MalformedRow {
            line: e.position().map(|p| p.line() as usize).unwrap_or(0),
            reason: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(0);
        let fields = header
            .iter()
            .zip(&positions)
            .map(|(col, &pos)| (col.to_string(), record.get(pos).unwrap_or("").to_string()))
            .collect();
        rows.push((line, fields));
    }
    Ok(rows)
}

fn read_json_rows(text: &str, header: &[&str]) -> Result<Vec<RawRow>> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| ModelError::MalformedRow {
        line: e.line(),
        reason: e.to_string(),
    })?;
    let array = value.as_array().ok_or_else(|| ModelError::MalformedRow {
        line: 1,
        reason: "expected a JSON array of row objects".into(),
    })?;
    let mut rows = Vec::with_capacity(array.len());
    for (i, obj) in array.iter().enumerate() {
        let line = i + 1;
        let obj = obj.as_object().ok_or_else(|| ModelError::MalformedRow {
            line,
            reason: "row is not an object".into(),
        })?;
        let mut fields = BTreeMap::new();
        for col in header {
            let text = match obj.get(*col) {
                None | Some(serde_json::Value::Null) => String::new(),
                Some(serde_json::Value::String(s)) => s.trim().to_string(),
                Some(serde_json::Value::Number(n)) => n.to_string(),
                Some(other) => {
                    return Err(ModelError::MalformedRow {
                        line,
                        reason: format!("column `{col}` has unsupported value {other}"),
                    })
                }
            };
            fields.insert(col.to_string(), text);
        }
        rows.push((line, fields));
    }
    Ok(rows)
}

fn field<'a>(row: &'a RawRow, col: &str) -> &'a str {
    row.1.get(col).map(String::as_str).unwrap_or("")
}

fn int_field(row: &RawRow, col: &str) -> Result<i64> {
    let text = field(row, col);
    text.parse::<i64>().map_err(|_| ModelError::MalformedRow {
        line: row.0,
        reason: format!("column `{col}`: expected an integer, found `{text}`"),
    })
}

fn positive_u32(row: &RawRow, col: &str) -> Result<u32> {
    let v = int_field(row, col)?;
    u32::try_from(v)
        .ok()
        .filter(|&v| v >= 1)
        .ok_or_else(|| ModelError::MalformedRow {
            line: row.0,
            reason: format!("column `{col}`: expected a positive integer, found {v}"),
        })
}

/// Parses and validates survey ratings, returning records in file order.
pub fn parse_ratings(
    source: impl Read,
    format: Format,
    criteria: &CriterionSet,
) -> Result<Vec<SurveyRecord>> {
    let rows = read_raw_rows(source, format, &RATINGS_HEADER)?;
    let mut seen = BTreeSet::new();
    let mut records = Vec::with_capacity(rows.len());
    for row in &rows {
        let expert_id = positive_u32(row, "expert_id")?;
        let concept_id = positive_u32(row, "concept_id")?;
        let code = field(row, "criterion");
        if code.is_empty() {
            return Err(ModelError::MalformedRow {
                line: row.0,
                reason: "column `criterion` is empty".into(),
            });
        }
        if !criteria.contains(code) {
            return Err(ModelError::UnknownCriterion {
                line: row.0,
                criterion: code.to_string(),
            });
        }
        let score = int_field(row, "score")?;
        if !(SCORE_MIN..=SCORE_MAX).contains(&score) {
            return Err(ModelError::ScoreOutOfRange { line: row.0, score });
        }
        let criterion = CriterionId::new(code);
        if !seen.insert((expert_id, concept_id, criterion.clone())) {
            return Err(ModelError::DuplicateTriple {
                line: row.0,
                expert_id,
                concept_id,
                criterion,
            });
        }
        records.push(SurveyRecord {
            expert_id,
            concept_id,
            criterion,
            score: score as u8,
        });
    }
    Ok(records)
}

/// Averages expert scores per (concept, criterion) cell.
///
/// Rows are concepts in ascending id order; columns follow `criteria`.
pub fn aggregate_ratings(records: &[SurveyRecord], criteria: &CriterionSet) -> Result<RatingMatrix> {
    if records.is_empty() {
        return Err(ModelError::Empty);
    }
    let mut cells: BTreeMap<(u32, &CriterionId), (u64, u64)> = BTreeMap::new();
    for r in records {
        let cell = cells.entry((r.concept_id, &r.criterion)).or_default();
        cell.0 += u64::from(r.score);
        cell.1 += 1;
    }
    let concept_ids: Vec<u32> = records
        .iter()
        .map(|r| r.concept_id)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let present: BTreeSet<CriterionId> = records.iter().map(|r| r.criterion.clone()).collect();
    let columns = criteria.order(&present);

    let mut missing = Vec::new();
    let mut values = Vec::with_capacity(concept_ids.len());
    for &c in &concept_ids {
        let mut row = Vec::with_capacity(columns.len());
        for k in &columns {
            match cells.get(&(c, k)) {
                Some(&(sum, n)) => row.push(sum as f64 / n as f64),
                None => {
                    missing.push((c, k.clone()));
                    row.push(f64::NAN);
                }
            }
        }
        values.push(row);
    }
    if !missing.is_empty() {
        return Err(ModelError::MissingCell { missing });
    }
    RatingMatrix::new(concept_ids, columns, values)
}

/// Writes ratings back out in the given format.
pub fn serialize_ratings(records: &[SurveyRecord], format: Format) -> String {
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
            w.write_record(RATINGS_HEADER).expect("in-memory write");
            for r in records {
                w.write_record([
                    r.expert_id.to_string(),
                    r.concept_id.to_string(),
                    r.criterion.to_string(),
                    r.score.to_string(),
                ])
                .expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
        }
        Format::Json => serde_json::to_string_pretty(records).expect("serializable") + "\n",
    }
}

#[derive(Debug, Clone, Serialize)]
struct RankRow<'a> {
    expert_id: u32,
    expert_rank: u32,
    criterion: &'a CriterionId,
    criterion_rank: u32,
    item_id: &'a ItemId,
    item_rank: usize,
}

/// Parses rank tables into one profile per expert, ordered by expert id.
///
/// With `items = None` the item universe is the union of all item ids in
/// the file; every (expert, criterion) ranking must then cover all of them.
/// A blank `expert_rank` defaults to 1.
pub fn parse_ranks(
    source: impl Read,
    format: Format,
    criteria: &CriterionSet,
    items: Option<&[ItemId]>,
) -> Result<Vec<RankProfile>> {
    let rows = read_raw_rows(source, format, &RANKS_HEADER)?;
    let declared_items: Option<BTreeSet<&ItemId>> = items.map(|i| i.iter().collect());

    struct Block {
        criterion_rank: u32,
        entries: Vec<(u32, ItemId)>,
    }
    struct Partial {
        expert_rank: u32,
        blocks: BTreeMap<CriterionId, Block>,
    }
    let mut experts: BTreeMap<u32, Partial> = BTreeMap::new();
    let mut all_items = BTreeSet::new();
    let mut all_criteria = BTreeSet::new();

    for row in &rows {
        let line = row.0;
        let expert_id = positive_u32(row, "expert_id")?;
        let expert_rank = if field(row, "expert_rank").is_empty() {
            1
        } else {
            positive_u32(row, "expert_rank")?
        };
        let code = field(row, "criterion");
        if code.is_empty() || !criteria.contains(code) {
            return Err(ModelError::UnknownCriterion {
                line,
                criterion: code.to_string(),
            });
        }
        let criterion = CriterionId::new(code);
        let criterion_rank = positive_u32(row, "criterion_rank")?;
        let item_text = field(row, "item_id");
        if item_text.is_empty() {
            return Err(ModelError::MalformedRow {
                line,
                reason: "column `item_id` is empty".into(),
            });
        }
        let item = ItemId::new(item_text);
        if let Some(declared) = &declared_items {
            if !declared.contains(&item) {
                return Err(ModelError::UnknownItem { line, item });
            }
        }
        let item_rank = positive_u32(row, "item_rank")?;

        let partial = experts.entry(expert_id).or_insert(Partial {
            expert_rank,
            blocks: BTreeMap::new(),
        });
        if partial.expert_rank != expert_rank {
            return Err(ModelError::MalformedRow {
                line,
                reason: format!("expert {expert_id} has conflicting expert_rank values"),
            });
        }
        let block = partial.blocks.entry(criterion.clone()).or_insert(Block {
            criterion_rank,
            entries: Vec::new(),
        });
        if block.criterion_rank != criterion_rank {
            return Err(ModelError::MalformedRow {
                line,
                reason: format!(
                    "expert {expert_id} gives criterion {criterion} conflicting ranks"
                ),
            });
        }
        block.entries.push((item_rank, item.clone()));
        all_items.insert(item);
        all_criteria.insert(criterion);
    }

    let universe_items: BTreeSet<ItemId> = match items {
        Some(i) => i.iter().cloned().collect(),
        None => all_items,
    };
    let universe_criteria: BTreeSet<CriterionId> = if criteria.is_open() {
        all_criteria
    } else {
        criteria.order(&all_criteria).into_iter().collect()
    };

    let mut profiles = Vec::with_capacity(experts.len());
    for (expert_id, partial) in experts {
        let non_perm = |detail: String| ModelError::NonPermutation { expert_id, detail };
        let ranked: BTreeSet<CriterionId> = partial.blocks.keys().cloned().collect();
        if ranked != universe_criteria {
            let absent: Vec<String> = universe_criteria
                .difference(&ranked)
                .map(|c| c.to_string())
                .collect();
            return Err(non_perm(format!("does not rank criteria {absent:?}")));
        }
        let mut criterion_ranks = BTreeMap::new();
        let mut item_ranks = BTreeMap::new();
        for (criterion, mut block) in partial.blocks {
            block.entries.sort();
            let m = universe_items.len();
            let ranks_ok = block.entries.len() == m
                && block
                    .entries
                    .iter()
                    .enumerate()
                    .all(|(pos, (r, _))| *r as usize == pos + 1);
            let listed: BTreeSet<&ItemId> = block.entries.iter().map(|(_, i)| i).collect();
            let items_ok = listed.len() == m && listed.iter().all(|i| universe_items.contains(*i));
            if !ranks_ok || !items_ok {
                let ranks: Vec<u32> = block.entries.iter().map(|(r, _)| *r).collect();
                return Err(non_perm(format!(
                    "criterion {criterion}: item ranks {ranks:?} over {} listed items do not form a permutation of 1..={m}",
                    listed.len()
                )));
            }
            criterion_ranks.insert(criterion.clone(), block.criterion_rank);
            item_ranks.insert(
                criterion,
                block.entries.into_iter().map(|(_, i)| i).collect(),
            );
        }
        let profile = RankProfile {
            expert_id,
            expert_rank: partial.expert_rank,
            criterion_ranks,
            item_ranks,
        };
        profile.validate()?;
        profiles.push(profile);
    }
    if profiles.is_empty() {
        return Err(ModelError::Empty);
    }
    Ok(profiles)
}

/// Writes rank profiles as flat rows, one per (expert, criterion, item).
pub fn serialize_ranks(profiles: &[RankProfile], format: Format) -> String {
    let mut rows = Vec::new();
    for p in profiles {
        for (criterion, order) in &p.item_ranks {
            let mut by_id: Vec<(usize, &ItemId)> =
                order.iter().enumerate().map(|(r, i)| (r + 1, i)).collect();
            by_id.sort_by(|a, b| a.1.cmp(b.1));
            for (item_rank, item_id) in by_id {
                rows.push(RankRow {
                    expert_id: p.expert_id,
                    expert_rank: p.expert_rank,
                    criterion,
                    criterion_rank: p.criterion_ranks[criterion],
                    item_id,
                    item_rank,
                });
            }
        }
    }
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
            for row in &rows {
                w.serialize(row).expect("in-memory write");
            }
            if rows.is_empty() {
                w.write_record(RANKS_HEADER).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
        }
        Format::Json => serde_json::to_string_pretty(&rows).expect("serializable") + "\n",
    }
}
