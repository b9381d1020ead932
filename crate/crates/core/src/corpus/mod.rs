//! Article collections: ingestion, outlet leaning, URL filtering and
//! near-duplicate removal.

mod title;
mod urls;

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use title::{dedup_by_title, titles_duplicate, TitleDedupConfig};
pub use urls::{default_url_tags, dedup_by_url, filter_by_url, normalize_url, parse_url_tags};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: invalid article record: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid outlet table: {0}")]
    Toml(#[from] toml::de::Error),
    #[error("duplicate article_id {0:?}")]
    DuplicateId(String),
    #[error("empty URL tag list")]
    NoTags,
}

/// Outlet political leaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Leaning {
    Left,
    Right,
    #[default]
    Unknown,
}

impl Leaning {
    pub fn short(self) -> &'static str {
        match self {
            Leaning::Left => "LL",
            Leaning::Right => "RL",
            Leaning::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleRecord {
    pub article_id: String,
    pub url: String,
    pub title: String,
    #[serde(default)]
    pub body: String,
    pub outlet: String,
    pub publish_date: NaiveDate,
    /// Always overwritten from the outlet table by [`OutletTable::assign`].
    #[serde(default)]
    pub leaning: Leaning,
    #[serde(default)]
    pub is_wire: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutletInfo {
    pub leaning: Leaning,
    #[serde(default)]
    pub wire: bool,
}

/// Outlet name to leaning / wire-service flag.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutletTable {
    pub outlets: BTreeMap<String, OutletInfo>,
}

/// Outlet table bundled with the crate.
pub const SHIPPED_OUTLETS: &str = include_str!("../../data/outlets.toml");

impl OutletTable {
    pub fn shipped() -> Self {
        Self::from_toml_str(SHIPPED_OUTLETS).expect("shipped outlet table parses")
    }

    pub fn from_toml_str(s: &str) -> Result<Self, CorpusError> {
        Ok(toml::from_str(s)?)
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn leaning(&self, outlet: &str) -> Leaning {
        self.outlets
            .get(outlet)
            .map(|o| o.leaning)
            .unwrap_or(Leaning::Unknown)
    }

    /// Sets every article's leaning from the table; outlets absent from the
    /// table become `Unknown`. Wire-service outlets mark their articles as wire.
    pub fn assign(&self, articles: &mut [ArticleRecord]) {
        for a in articles.iter_mut() {
            match self.outlets.get(&a.outlet) {
                Some(info) => {
                    a.leaning = info.leaning;
                    a.is_wire |= info.wire;
                }
                None => a.leaning = Leaning::Unknown,
            }
        }
    }
}

/// Reads JSON-lines articles. Blank lines and `_meta` header lines are skipped.
pub fn read_articles<R: BufRead>(reader: R) -> Result<Vec<ArticleRecord>, CorpusError> {
    let mut out = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with("{\"_meta\"") {
            continue;
        }
        let rec: ArticleRecord = serde_json::from_str(trimmed).map_err(|source| CorpusError::Json {
            line: i + 1,
            source,
        })?;
        if !seen.insert(rec.article_id.clone()) {
            return Err(CorpusError::DuplicateId(rec.article_id));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_articles<W: Write>(mut writer: W, articles: &[ArticleRecord]) -> std::io::Result<()> {
    for a in articles {
        serde_json::to_writer(&mut writer, a)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Outlets ranked by article count, most frequent first; ties by name.
pub fn top_outlets(articles: &[ArticleRecord], n: usize) -> Vec<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for a in articles {
        *counts.entry(a.outlet.as_str()).or_default() += 1;
    }
    let mut ranked: Vec<(&str, usize)> = counts.into_iter().collect();
    ranked.sort_by(|x, y| y.1.cmp(&x.1).then(x.0.cmp(y.0)));
    ranked.into_iter().take(n).map(|(o, _)| o.to_string()).collect()
}

/// Drops wire articles and/or the articles of the `exclude_top` most
/// frequent outlets.
pub fn select_articles(articles: &[ArticleRecord], exclude_wire: bool, exclude_top: usize) -> Vec<ArticleRecord> {
    let top = top_outlets(articles, exclude_top);
    articles
        .iter()
        .filter(|a| !(exclude_wire && a.is_wire) && !top.contains(&a.outlet))
        .cloned()
        .collect()
}

/// Article id to outlet leaning.
pub fn article_leanings(articles: &[ArticleRecord]) -> BTreeMap<String, Leaning> {
    articles.iter().map(|a| (a.article_id.clone(), a.leaning)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn article(id: &str, outlet: &str) -> ArticleRecord {
        ArticleRecord {
            article_id: id.into(),
            url: format!("https://x.com/{id}"),
            title: "t".into(),
            body: String::new(),
            outlet: outlet.into(),
            publish_date: NaiveDate::from_ymd_opt(2010, 1, 1).unwrap(),
            leaning: Leaning::Right,
            is_wire: false,
        }
    }

    #[test]
    fn leaning_comes_from_table_only() {
        let table = OutletTable::from_toml_str(
            r#"
            [outlets.Vox]
            leaning = "left"
            [outlets.AP]
            leaning = "unknown"
            wire = true
            "#,
        )
        .unwrap();
        let mut arts = vec![article("1", "Vox"), article("2", "Nowhere"), article("3", "AP")];
        table.assign(&mut arts);
        assert_eq!(arts[0].leaning, Leaning::Left);
        assert_eq!(arts[1].leaning, Leaning::Unknown);
        assert!(arts[2].is_wire);
    }

    #[test]
    fn selection_drops_wire_and_top_outlets() {
        let mut arts = vec![article("1", "A"), article("2", "A"), article("3", "B"), article("4", "C")];
        arts[2].is_wire = true;
        assert_eq!(top_outlets(&arts, 2), vec!["A".to_string(), "B".to_string()]);
        let kept: Vec<String> = select_articles(&arts, true, 0).into_iter().map(|a| a.article_id).collect();
        assert_eq!(kept, ["1", "2", "4"]);
        let kept: Vec<String> = select_articles(&arts, false, 1).into_iter().map(|a| a.article_id).collect();
        assert_eq!(kept, ["3", "4"]);
    }

    #[test]
    fn shipped_outlet_table_parses() {
        let table = OutletTable::shipped();
        assert_eq!(table.leaning("Breitbart"), Leaning::Right);
        assert_eq!(table.leaning("Vox"), Leaning::Left);
    }

    #[test]
    fn jsonl_roundtrip_and_duplicate_ids() {
        let arts = vec![article("a", "Vox"), article("b", "Fox")];
        let mut buf = Vec::new();
        write_articles(&mut buf, &arts).unwrap();
        assert_eq!(read_articles(&buf[..]).unwrap(), arts);
        let dup = vec![article("a", "Vox"), article("a", "Fox")];
        let mut buf = Vec::new();
        write_articles(&mut buf, &dup).unwrap();
        assert!(matches!(read_articles(&buf[..]), Err(CorpusError::DuplicateId(_))));
    }
}
