use std::collections::HashSet;

use url::Url;

use super::{ArticleRecord, CorpusError};

const DEFAULT_TAGS: &str = include_str!("../../data/url_tags.txt");

/// Parses a tag file: one tag per line, `#` comments, duplicates dropped.
pub fn parse_url_tags(text: &str) -> Vec<String> {
    let mut seen = HashSet::new();
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .filter(|l| seen.insert(l.to_string()))
        .map(str::to_string)
        .collect()
}

pub fn default_url_tags() -> Vec<String> {
    parse_url_tags(DEFAULT_TAGS)
}

/// Scheme, query string, fragment and trailing slashes removed; host
/// lowercased. Path case is preserved.
pub fn normalize_url(raw: &str) -> String {
    let s = raw.trim();
    let s = match s.find("://") {
        Some(i) => &s[i + 3..],
        None => s,
    };
    let s = s.split('#').next().unwrap_or("");
    let s = s.split('?').next().unwrap_or("");
    let (host, path) = match s.find('/') {
        Some(i) => (&s[..i], &s[i..]),
        None => (s, ""),
    };
    let mut out = host.to_lowercase();
    out.push_str(path);
    while out.ends_with('/') {
        out.pop();
    }
    out
}

/// Path of the normalized URL with a trailing slash, or `None` if the URL
/// cannot be parsed.
fn normalized_path(raw: &str) -> Option<String> {
    let parsed = Url::parse(&format!("http://{}", normalize_url(raw))).ok()?;
    parsed.host_str().filter(|h| !h.is_empty())?;
    let mut path = parsed.path().to_string();
    if !path.ends_with('/') {
        path.push('/');
    }
    Some(path)
}

/// Drops articles whose URL path contains any of `tags`. Order is preserved;
/// articles with unparseable URLs are kept.
///
/// The decision depends only on the normalized URL, so filtering commutes
/// with [`dedup_by_url`].
pub fn filter_by_url(
    articles: Vec<ArticleRecord>,
    tags: &[String],
) -> Result<Vec<ArticleRecord>, CorpusError> {
    if tags.is_empty() {
        return Err(CorpusError::NoTags);
    }
    Ok(articles
        .into_iter()
        .filter(|a| match normalized_path(&a.url) {
            Some(path) => !tags.iter().any(|t| path.contains(t.as_str())),
            None => {
                log::warn!("article {}: malformed URL {:?}, keeping it", a.article_id, a.url);
                true
            }
        })
        .collect())
}

/// Keeps the first article for each normalized URL.
pub fn dedup_by_url(articles: Vec<ArticleRecord>) -> Vec<ArticleRecord> {
    let mut seen = HashSet::new();
    articles
        .into_iter()
        .filter(|a| seen.insert(normalize_url(&a.url)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Leaning;
    use chrono::NaiveDate;
    use proptest::prelude::*;

    fn art(id: &str, url: &str) -> ArticleRecord {
        ArticleRecord {
            article_id: id.into(),
            url: url.into(),
            title: format!("title {id}"),
            body: String::new(),
            outlet: "o".into(),
            publish_date: NaiveDate::from_ymd_opt(2015, 3, 1).unwrap(),
            leaning: Leaning::Unknown,
            is_wire: false,
        }
    }

    fn ids(v: &[ArticleRecord]) -> Vec<&str> {
        v.iter().map(|a| a.article_id.as_str()).collect()
    }

    #[test]
    fn default_tags_exclude_sports_keep_science() {
        let tags = default_url_tags();
        assert!(tags.contains(&"/sports/".to_string()));
        let kept = filter_by_url(
            vec![
                art("1", "https://www.nytimes.com/2019/sports/game-recap"),
                art("2", "https://www.nytimes.com/2019/science/warming-study"),
            ],
            &tags,
        )
        .unwrap();
        assert_eq!(ids(&kept), ["2"]);
    }

    #[test]
    fn empty_input_and_empty_tags() {
        assert!(filter_by_url(vec![], &default_url_tags()).unwrap().is_empty());
        assert!(matches!(filter_by_url(vec![], &[]), Err(CorpusError::NoTags)));
    }

    #[test]
    fn malformed_url_is_kept() {
        let kept = filter_by_url(vec![art("1", "not a url/sports/"), art("2", "")], &default_url_tags()).unwrap();
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn tag_at_end_of_path_matches() {
        let kept = filter_by_url(vec![art("1", "https://a.com/video")], &default_url_tags()).unwrap();
        assert!(kept.is_empty());
    }

    #[test]
    fn url_normalization() {
        assert_eq!(normalize_url("http://A.com/x?utm=1"), "a.com/x");
        assert_eq!(normalize_url("https://a.com/x/"), "a.com/x");
        assert_eq!(normalize_url("a.com/X#frag"), "a.com/X");
    }

    #[test]
    fn url_dedup_examples() {
        let out = dedup_by_url(vec![art("1", "http://A.com/x?utm=1"), art("2", "https://a.com/x/")]);
        assert_eq!(ids(&out), ["1"]);
        let out = dedup_by_url(vec![art("1", "a.com/x"), art("2", "a.com/y")]);
        assert_eq!(out.len(), 2);
        let out = dedup_by_url(vec![art("1", "a.com/x"), art("2", "a.com/y"), art("3", "a.com/x")]);
        assert_eq!(ids(&out), ["1", "2"]);
    }

    fn url_strategy() -> impl Strategy<Value = String> {
        let scheme = prop_oneof![Just(""), Just("http://"), Just("https://")];
        let host = prop_oneof![Just("a.com"), Just("A.com"), Just("b.org")];
        let path = prop_oneof![
            Just("/x"),
            Just("/sports/x"),
            Just("/sports"),
            Just("/sports/"),
            Just("/science/y"),
            Just("/arts"),
            Just("")
        ];
        let tail = prop_oneof![Just(""), Just("/"), Just("?q=1"), Just("#f")];
        (scheme, host, path, tail).prop_map(|(s, h, p, t)| format!("{s}{h}{p}{t}"))
    }

    proptest! {
        #[test]
        fn filter_commutes_with_url_dedup(urls in prop::collection::vec(url_strategy(), 0..12)) {
            let arts: Vec<_> = urls.iter().enumerate().map(|(i, u)| art(&i.to_string(), u)).collect();
            let tags = default_url_tags();
            let a = filter_by_url(dedup_by_url(arts.clone()), &tags).unwrap();
            let b = dedup_by_url(filter_by_url(arts, &tags).unwrap());
            prop_assert_eq!(a, b);
        }
    }
}
