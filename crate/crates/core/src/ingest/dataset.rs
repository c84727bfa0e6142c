use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;

use crate::error::{Error, Result};
use crate::schema::{validate_schema, AttributeKind, DateFormat, Schema};

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub row_id: usize,
    /// One cell per schema attribute, in schema order.
    pub cells: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
enum ParsedColumn {
    Numeric(Vec<f64>),
    Date(Vec<NaiveDate>),
    Unparsed,
}

/// The flattened input table, validated against its schema.
#[derive(Debug, Clone)]
pub struct Dataset {
    schema: Schema,
    header: Vec<String>,
    /// Schema index of each header column.
    column_attributes: Vec<usize>,
    rows: Vec<Row>,
    parsed: Vec<ParsedColumn>,
    date_format: DateFormat,
}

impl Dataset {
    /// Builds a dataset from a header and raw records (in header order).
    pub fn from_records(schema: Schema, header: Vec<String>, records: Vec<Vec<String>>) -> Result<Self> {
        validate_schema(&schema, &header).into_result()?;
        let date_format = schema.date_format()?;

        let mut column_attributes = Vec::with_capacity(header.len());
        for name in &header {
            match schema.position(name) {
                Some(i) => column_attributes.push(i),
                None => {
                    return Err(Error::HeaderMismatch(format!(
                        "column {name:?} is not declared in the schema"
                    )))
                }
            }
        }
        if column_attributes.len() != schema.attributes.len() {
            return Err(Error::HeaderMismatch("duplicate column in header".into()));
        }

        let mut rows = Vec::with_capacity(records.len());
        for (row_id, record) in records.into_iter().enumerate() {
            if record.len() != header.len() {
                return Err(Error::HeaderMismatch(format!(
                    "row {row_id} has {} cells, header has {}",
                    record.len(),
                    header.len()
                )));
            }
            let mut cells = vec![String::new(); schema.attributes.len()];
            for (col, value) in record.into_iter().enumerate() {
                cells[column_attributes[col]] = value.trim().to_string();
            }
            rows.push(Row { row_id, cells });
        }

        let mut parsed = Vec::with_capacity(schema.attributes.len());
        for (attr_idx, attr) in schema.attributes.iter().enumerate() {
            let must_be_present = attr.kind.is_quasi() || attr.kind == AttributeKind::DirectIdentifier;
            if must_be_present {
                if let Some(row) = rows.iter().find(|r| r.cells[attr_idx].is_empty()) {
                    return Err(Error::Parse {
                        row: row.row_id,
                        column: attr.name.clone(),
                        value: String::new(),
                        reason: "empty value".into(),
                    });
                }
            }
            let column = match attr.kind {
                AttributeKind::QuasiNumeric => {
                    let mut values = Vec::with_capacity(rows.len());
                    for row in &rows {
                        let raw = &row.cells[attr_idx];
                        match raw.parse::<f64>() {
                            Ok(v) if v.is_finite() => values.push(v),
                            _ => {
                                return Err(Error::Parse {
                                    row: row.row_id,
                                    column: attr.name.clone(),
                                    value: raw.clone(),
                                    reason: "not a finite number".into(),
                                })
                            }
                        }
                    }
                    ParsedColumn::Numeric(values)
                }
                AttributeKind::QuasiDate => {
                    let mut values = Vec::with_capacity(rows.len());
                    for row in &rows {
                        let raw = &row.cells[attr_idx];
                        match date_format.parse_date(raw) {
                            Some(d) => values.push(d),
                            None => {
                                return Err(Error::Parse {
                                    row: row.row_id,
                                    column: attr.name.clone(),
                                    value: raw.clone(),
                                    reason: format!("not a date in format {}", schema.date_format),
                                })
                            }
                        }
                    }
                    ParsedColumn::Date(values)
                }
                _ => ParsedColumn::Unparsed,
            };
            parsed.push(column);
        }

        Ok(Dataset {
            schema,
            header,
            column_attributes,
            rows,
            parsed,
            date_format,
        })
    }

    pub fn from_reader<R: Read>(reader: R, schema: Schema) -> Result<Self> {
        let (header, records) = read_csv(reader)?;
        Self::from_records(schema, header, records)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    /// Column names in file order.
    pub fn header(&self) -> &[String] {
        &self.header
    }

    /// Schema index of each header column, in file order.
    pub fn column_attributes(&self) -> &[usize] {
        &self.column_attributes
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn cell(&self, row_id: usize, attribute: usize) -> &str {
        &self.rows[row_id].cells[attribute]
    }

    pub fn numeric(&self, row_id: usize, attribute: usize) -> Option<f64> {
        match &self.parsed[attribute] {
            ParsedColumn::Numeric(v) => Some(v[row_id]),
            _ => None,
        }
    }

    pub fn date(&self, row_id: usize, attribute: usize) -> Option<NaiveDate> {
        match &self.parsed[attribute] {
            ParsedColumn::Date(v) => Some(v[row_id]),
            _ => None,
        }
    }

    pub fn date_format(&self) -> &DateFormat {
        &self.date_format
    }

    /// Value of the direct identifier in `row_id`.
    pub fn person_id(&self, row_id: usize) -> &str {
        let idx = self.schema.direct_identifier().expect("validated schema");
        self.cell(row_id, idx)
    }
}

fn read_csv<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(Error::HeaderMismatch("missing header row".into()));
    }
    let mut records = Vec::new();
    for rec in rdr.records() {
        records.push(rec?.iter().map(str::to_string).collect());
    }
    Ok((header, records))
}

/// Loads a flattened CSV dataset. Row ids are 0-based in file order.
pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Dataset::from_reader(std::io::BufReader::new(file), schema.clone())
}

/// Loads a person table and an event table and joins them on the direct
/// identifier. Event order determines row ids; person columns are appended
/// after the event columns.
pub fn load_joined(persons: impl AsRef<Path>, events: impl AsRef<Path>, schema: &Schema) -> Result<Dataset> {
    let open = |p: &Path| -> Result<_> {
        let file = std::fs::File::open(p).map_err(|e| Error::io(p, e))?;
        read_csv(std::io::BufReader::new(file))
    };
    let (p_header, p_records) = open(persons.as_ref())?;
    let (e_header, e_records) = open(events.as_ref())?;
    join_tables(schema, p_header, p_records, e_header, e_records)
}

fn join_tables(
    schema: &Schema,
    p_header: Vec<String>,
    p_records: Vec<Vec<String>>,
    e_header: Vec<String>,
    e_records: Vec<Vec<String>>,
) -> Result<Dataset> {
    let id_name = schema
        .direct_identifier()
        .map(|i| schema.attributes[i].name.clone())
        .ok_or_else(|| Error::Schema(vec![crate::schema::Violation::NoDirectIdentifier]))?;
    let p_id = p_header
        .iter()
        .position(|h| *h == id_name)
        .ok_or_else(|| Error::HeaderMismatch(format!("person table lacks {id_name:?}")))?;
    let e_id = e_header
        .iter()
        .position(|h| *h == id_name)
        .ok_or_else(|| Error::HeaderMismatch(format!("event table lacks {id_name:?}")))?;

    let mut by_id: HashMap<&str, &Vec<String>> = HashMap::new();
    for rec in &p_records {
        if by_id.insert(rec[p_id].as_str(), rec).is_some() {
            return Err(Error::HeaderMismatch(format!(
                "person table repeats {id_name} {:?}",
                rec[p_id]
            )));
        }
    }
    let extra: Vec<usize> = (0..p_header.len())
        .filter(|&i| !e_header.contains(&p_header[i]))
        .collect();

    let mut header = e_header.clone();
    header.extend(extra.iter().map(|&i| p_header[i].clone()));
    let mut records = Vec::with_capacity(e_records.len());
    for (n, rec) in e_records.into_iter().enumerate() {
        let person = by_id
            .get(rec[e_id].as_str())
            .ok_or_else(|| Error::HeaderMismatch(format!("event row {n}: no person with {id_name} {:?}", rec[e_id])))?;
        let mut joined = rec;
        joined.extend(extra.iter().map(|&i| person[i].clone()));
        records.push(joined);
    }
    Dataset::from_records(schema.clone(), header, records)
}
