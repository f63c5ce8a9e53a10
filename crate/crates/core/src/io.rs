//! File formats. Items are written 1-based; item 0 in count and
//! probability tables is the outside option.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::design::{Assortment, Experiment, ExperimentDesign};
use crate::error::{NestError, Result};
use crate::identify::{EdgeMatrix, NULL};
use crate::model::{ChoiceProbabilities, NestPartition, NestedLogitModel};
use crate::sampling::{ChoiceCountTable, CountRow, ProbabilityRow, ProbabilityTable};

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn write_json<T: Serialize>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    Ok(())
}

fn to_one_based(items: &[usize]) -> Vec<usize> {
    items.iter().map(|i| i + 1).collect()
}

fn to_zero_based(items: &[usize], n: usize) -> Result<Vec<usize>> {
    items
        .iter()
        .map(|&i| {
            if i == 0 || i > n {
                Err(NestError::ItemOutOfRange { item: i, n })
            } else {
                Ok(i - 1)
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentFile {
    pub label: String,
    pub items: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignFile {
    pub n: usize,
    pub b: Option<usize>,
    pub control: Vec<usize>,
    pub experiments: Vec<ExperimentFile>,
}

impl From<&ExperimentDesign> for DesignFile {
    fn from(d: &ExperimentDesign) -> Self {
        DesignFile {
            n: d.n(),
            b: d.base(),
            control: to_one_based(d.control().items()),
            experiments: d
                .experiments()
                .iter()
                .map(|e| ExperimentFile {
                    label: e.label.to_string(),
                    items: to_one_based(e.assortment.items()),
                })
                .collect(),
        }
    }
}

impl DesignFile {
    pub fn into_design(self) -> Result<ExperimentDesign> {
        if self.control != (1..=self.n).collect::<Vec<_>>() {
            return Err(NestError::Parse("the control must offer every item".into()));
        }
        let experiments = self
            .experiments
            .iter()
            .map(|e| {
                Ok(Experiment {
                    label: e.label.parse()?,
                    assortment: Assortment::new(to_zero_based(&e.items, self.n)?, self.n)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ExperimentDesign::new(self.n, self.b, experiments)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartitionFile {
    pub n: usize,
    pub nests: Vec<Vec<usize>>,
}

impl From<&NestPartition> for PartitionFile {
    fn from(p: &NestPartition) -> Self {
        PartitionFile {
            n: p.n(),
            nests: p.nests().iter().map(|x| to_one_based(x)).collect(),
        }
    }
}

impl PartitionFile {
    pub fn into_partition(self) -> Result<NestPartition> {
        let nests = self
            .nests
            .iter()
            .map(|x| to_zero_based(x, self.n))
            .collect::<Result<Vec<_>>>()?;
        NestPartition::new(self.n, nests)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub n: usize,
    pub nests: Vec<Vec<usize>>,
    pub v: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Keyed by 1-based nest index.
    #[serde(default)]
    pub v_nest_degenerate: BTreeMap<String, f64>,
    pub outside_option: bool,
}

impl From<&NestedLogitModel> for ModelFile {
    fn from(m: &NestedLogitModel) -> Self {
        ModelFile {
            n: m.n(),
            nests: PartitionFile::from(m.partition()).nests,
            v: m.weights().to_vec(),
            lambda: m.lambda().to_vec(),
            v_nest_degenerate: m
                .degenerate_weight()
                .iter()
                .enumerate()
                .filter_map(|(k, w)| w.map(|w| ((k + 1).to_string(), w)))
                .collect(),
            outside_option: m.has_outside_option(),
        }
    }
}

impl ModelFile {
    pub fn into_model(self) -> Result<NestedLogitModel> {
        let partition = PartitionFile {
            n: self.n,
            nests: self.nests,
        }
        .into_partition()?;
        let mut degenerate = vec![None; partition.len()];
        for (key, w) in self.v_nest_degenerate {
            let k: usize = key
                .parse()
                .ok()
                .filter(|&k| k >= 1 && k <= degenerate.len())
                .ok_or_else(|| NestError::Parse(format!("bad nest index `{key}`")))?;
            degenerate[k - 1] = Some(w);
        }
        NestedLogitModel::new(partition, self.v, self.lambda, degenerate, self.outside_option)
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CountRecord {
    assortment_label: String,
    item_id: usize,
    count: u64,
    sample_size: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProbabilityRecord {
    assortment_label: String,
    item_id: usize,
    probability: f64,
}

pub fn write_counts<W: Write>(table: &ChoiceCountTable, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in &table.rows {
        let label = row.label.to_string();
        let record = |item_id, count| CountRecord {
            assortment_label: label.clone(),
            item_id,
            count,
            sample_size: row.sample_size,
        };
        if table.outside_option {
            out.serialize(record(0, row.outside))?;
        }
        for (&i, &c) in row.assortment.items().iter().zip(&row.counts) {
            out.serialize(record(i + 1, c))?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Groups records by label in order of first appearance.
fn group<T>(records: Vec<T>, label: impl Fn(&T) -> &str) -> Vec<(String, Vec<T>)> {
    let mut groups: Vec<(String, Vec<T>)> = Vec::new();
    for r in records {
        match groups.iter_mut().find(|(l, _)| l == label(&r)) {
            Some((_, g)) => g.push(r),
            None => groups.push((label(&r).to_string(), vec![r])),
        }
    }
    groups
}

/// `n` is the largest item id; the outside option is present when any row
/// lists item 0, and then every assortment must list it.
fn table_shape(groups: &[(String, Vec<usize>)]) -> Result<(usize, bool)> {
    let n = groups.iter().flat_map(|(_, ids)| ids).copied().max().unwrap_or(0);
    if n == 0 {
        return Err(NestError::Parse("table lists no items".into()));
    }
    let with_outside = groups.iter().filter(|(_, ids)| ids.contains(&0)).count();
    if with_outside != 0 && with_outside != groups.len() {
        return Err(NestError::Parse(
            "item 0 must appear for every assortment or for none".into(),
        ));
    }
    Ok((n, with_outside != 0))
}

fn parse_assortment(label: &str, ids: &[usize], n: usize) -> Result<Assortment> {
    let items: Vec<usize> = ids.iter().filter(|&&i| i != 0).map(|&i| i - 1).collect();
    let mut sorted = items.clone();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != items.len() {
        return Err(NestError::Parse(format!("repeated item in `{label}`")));
    }
    Assortment::new(items, n)
}

pub fn read_counts<R: Read>(r: R) -> Result<ChoiceCountTable> {
    let records = csv::Reader::from_reader(r)
        .deserialize()
        .collect::<std::result::Result<Vec<CountRecord>, _>>()?;
    let groups = group(records, |r| &r.assortment_label);
    let ids: Vec<(String, Vec<usize>)> = groups
        .iter()
        .map(|(l, g)| (l.clone(), g.iter().map(|r| r.item_id).collect()))
        .collect();
    let (n, outside_option) = table_shape(&ids)?;
    let rows = groups
        .into_iter()
        .map(|(label, mut g)| {
            g.sort_by_key(|r| r.item_id);
            let sample_size = g[0].sample_size;
            if g.iter().any(|r| r.sample_size != sample_size) {
                return Err(NestError::Parse(format!("inconsistent sample size in `{label}`")));
            }
            let total: u64 = g.iter().map(|r| r.count).sum();
            if total != sample_size {
                return Err(NestError::Parse(format!(
                    "counts in `{label}` sum to {total}, not {sample_size}"
                )));
            }
            let ids: Vec<usize> = g.iter().map(|r| r.item_id).collect();
            Ok(CountRow {
                label: label.parse()?,
                assortment: parse_assortment(&label, &ids, n)?,
                sample_size,
                counts: g.iter().filter(|r| r.item_id != 0).map(|r| r.count).collect(),
                outside: g.iter().find(|r| r.item_id == 0).map_or(0, |r| r.count),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ChoiceCountTable {
        n,
        outside_option,
        rows,
    })
}

pub fn write_probabilities<W: Write>(table: &ProbabilityTable, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for row in &table.rows {
        let label = row.label.to_string();
        let p = &row.probs;
        let record = |item_id, probability| ProbabilityRecord {
            assortment_label: label.clone(),
            item_id,
            probability,
        };
        if table.outside_option {
            out.serialize(record(0, p.outside_prob()))?;
        }
        for (&i, &q) in p.assortment.items().iter().zip(&p.probs) {
            out.serialize(record(i + 1, q))?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_probabilities<R: Read>(r: R) -> Result<ProbabilityTable> {
    let records = csv::Reader::from_reader(r)
        .deserialize()
        .collect::<std::result::Result<Vec<ProbabilityRecord>, _>>()?;
    let groups = group(records, |r| &r.assortment_label);
    let ids: Vec<(String, Vec<usize>)> = groups
        .iter()
        .map(|(l, g)| (l.clone(), g.iter().map(|r| r.item_id).collect()))
        .collect();
    let (n, outside_option) = table_shape(&ids)?;
    let rows = groups
        .into_iter()
        .map(|(label, mut g)| {
            g.sort_by_key(|r| r.item_id);
            let ids: Vec<usize> = g.iter().map(|r| r.item_id).collect();
            Ok(ProbabilityRow {
                label: label.parse()?,
                probs: ChoiceProbabilities {
                    assortment: parse_assortment(&label, &ids, n)?,
                    probs: g.iter().filter(|r| r.item_id != 0).map(|r| r.probability).collect(),
                    outside: outside_option
                        .then(|| g.iter().find(|r| r.item_id == 0).map_or(0.0, |r| r.probability)),
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProbabilityTable {
        n,
        outside_option,
        rows,
    })
}

/// Either table kind, told apart by the CSV header.
#[derive(Clone, Debug, PartialEq)]
pub enum ObservedTable {
    Counts(ChoiceCountTable),
    Probabilities(ProbabilityTable),
}

pub fn read_table(path: impl AsRef<Path>) -> Result<ObservedTable> {
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    let header = text.lines().next().unwrap_or_default();
    if header.split(',').any(|h| h.trim() == "count") {
        Ok(ObservedTable::Counts(read_counts(text.as_bytes())?))
    } else if header.split(',').any(|h| h.trim() == "probability") {
        Ok(ObservedTable::Probabilities(read_probabilities(text.as_bytes())?))
    } else {
        Err(NestError::Parse("expected a `count` or `probability` column".into()))
    }
}

/// Square matrix with a 1-based `item` column; undetermined entries are
/// written as `null` and the diagonal as empty.
pub fn write_edge_matrix<W: Write>(edges: &EdgeMatrix, w: W) -> Result<()> {
    let n = edges.n();
    let mut out = csv::Writer::from_writer(w);
    let header: Vec<String> = std::iter::once("item".to_string())
        .chain((1..=n).map(|j| j.to_string()))
        .collect();
    out.write_record(&header)?;
    for i in 0..n {
        let mut record = vec![(i + 1).to_string()];
        for j in 0..n {
            record.push(if i == j {
                String::new()
            } else if edges.is_null(i, j) {
                "null".into()
            } else {
                edges.get(i, j).to_string()
            });
        }
        out.write_record(&record)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_edge_matrix<R: Read>(r: R) -> Result<EdgeMatrix> {
    let mut reader = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .skip(1)
            .map(|f| match f.trim() {
                "" => Ok(0.0),
                "null" => Ok(NULL),
                x => x
                    .parse()
                    .map_err(|_| NestError::Parse(format!("bad matrix entry `{x}`"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.iter().any(|r| r.len() != rows.len()) {
        return Err(NestError::Parse("edge matrix is not square".into()));
    }
    Ok(EdgeMatrix::from_rows(&rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{balanced_enumeration, slice_design};
    use crate::model::generate_ground_truth;
    use crate::sampling::{allocate_customers, sample_choices};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn design_round_trip() {
        let d = slice_design(&balanced_enumeration(7, 3).unwrap());
        let json = serde_json::to_string(&DesignFile::from(&d)).unwrap();
        let back: DesignFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_design().unwrap(), d);
        assert!(json.contains("\"S(1,-0)\""));
    }

    #[test]
    fn model_round_trip_keeps_degenerate_weights() {
        let p = NestPartition::new(4, vec![vec![0, 3], vec![1, 2]]).unwrap();
        let m = NestedLogitModel::new(p, vec![1.0, 2.0, 3.0, 4.0], vec![0.5, 0.0], vec![None, Some(1.5)], true)
            .unwrap();
        let file = ModelFile::from(&m);
        assert_eq!(file.nests, vec![vec![1, 4], vec![2, 3]]);
        assert_eq!(file.v_nest_degenerate.get("2"), Some(&1.5));
        let json = serde_json::to_string(&file).unwrap();
        let back: ModelFile = serde_json::from_str(&json).unwrap();
        assert_eq!(back.into_model().unwrap(), m);
    }

    #[test]
    fn partition_rejects_item_zero() {
        let f = PartitionFile {
            n: 2,
            nests: vec![vec![0, 1]],
        };
        assert!(f.into_partition().is_err());
    }

    #[test]
    fn counts_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for outside in [true, false] {
            let m = generate_ground_truth(6, outside, &mut rng).unwrap();
            let d = slice_design(&balanced_enumeration(6, 2).unwrap());
            let k = d.offered().len();
            let t = sample_choices(&m, &d, &allocate_customers(700, k).unwrap(), 3).unwrap();
            let mut buf = Vec::new();
            write_counts(&t, &mut buf).unwrap();
            let text = String::from_utf8(buf.clone()).unwrap();
            assert!(text.starts_with("assortment_label,item_id,count,sample_size\n"));
            assert_eq!(read_counts(buf.as_slice()).unwrap(), t);
        }
    }

    #[test]
    fn counts_must_add_up() {
        let csv = "assortment_label,item_id,count,sample_size\ncontrol,0,1,5\ncontrol,1,2,5\n";
        assert!(read_counts(csv.as_bytes()).is_err());
        let csv = "assortment_label,item_id,count,sample_size\ncontrol,0,1,3\ncontrol,1,2,3\nS(1,-0),1,3,3\n";
        assert!(read_counts(csv.as_bytes()).is_err());
    }

    #[test]
    fn probabilities_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = generate_ground_truth(5, true, &mut rng).unwrap();
        let d = slice_design(&balanced_enumeration(5, 2).unwrap());
        let t = ProbabilityTable::from_model(&m, &d).unwrap();
        let mut buf = Vec::new();
        write_probabilities(&t, &mut buf).unwrap();
        assert_eq!(read_probabilities(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn edge_matrix_round_trip() {
        let mut e = EdgeMatrix::new(3);
        e.set(0, 1, 1.0);
        e.set(1, 2, 0.25);
        let mut buf = Vec::new();
        write_edge_matrix(&e, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "1,,1,null");
        let back = read_edge_matrix(buf.as_slice()).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    assert_eq!(back.get(i, j), e.get(i, j));
                }
            }
        }
    }
}
