//! Thin client for a News-API-compatible `everything` search endpoint.
//! Results are converted into [`Article`]s in the corpus file format.

use std::collections::HashSet;
use std::time::Duration;

use chrono::NaiveDate;
use serde::Deserialize;
use thiserror::Error;

use super::{parse_date, Article};
use crate::net::{HttpClient, NetError, RetryPolicy};

#[derive(Debug, Error)]
pub enum FetchError {
    #[error(transparent)]
    Net(#[from] NetError),
    #[error("news service reported an error: {0}")]
    Service(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewsQuery {
    /// Passed through verbatim as the `q` parameter.
    pub keyword: String,
    pub from: NaiveDate,
    pub to: NaiveDate,
    pub language: String,
    pub page_size: u32,
    pub max_pages: u32,
}

#[derive(Debug, Deserialize)]
struct NewsResponse {
    #[serde(default)]
    status: Option<String>,
    #[serde(default)]
    message: Option<String>,
    #[serde(default)]
    articles: Vec<NewsItem>,
}

#[derive(Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
struct NewsItem {
    #[serde(default)]
    source: Option<NewsSource>,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    description: Option<String>,
    #[serde(default)]
    content: Option<String>,
    #[serde(default)]
    url: Option<String>,
    #[serde(default)]
    published_at: Option<String>,
}

#[derive(Debug, Deserialize)]
struct NewsSource {
    #[serde(default)]
    name: Option<String>,
}

pub struct NewsClient {
    endpoint: String,
    api_key: Option<String>,
    http: HttpClient,
}

impl NewsClient {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Result<Self, FetchError> {
        Ok(Self {
            endpoint: endpoint.into(),
            api_key,
            http: HttpClient::new(timeout, RetryPolicy::default(), None)?,
        })
    }

    /// Pages through results until a short page or `max_pages`. Items with no
    /// parseable date are dropped; repeated ids keep the first occurrence.
    pub fn fetch(&self, query: &NewsQuery) -> Result<Vec<Article>, FetchError> {
        let from = query.from.format("%Y-%m-%d").to_string();
        let to = query.to.format("%Y-%m-%d").to_string();
        let page_size = query.page_size.to_string();
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        for page in 1..=query.max_pages.max(1) {
            let page_str = page.to_string();
            let params = [
                ("q", query.keyword.as_str()),
                ("from", from.as_str()),
                ("to", to.as_str()),
                ("language", query.language.as_str()),
                ("pageSize", page_size.as_str()),
                ("page", page_str.as_str()),
            ];
            let headers: Vec<(&str, &str)> = self
                .api_key
                .as_deref()
                .map(|k| vec![("X-Api-Key", k)])
                .unwrap_or_default();
            let resp: NewsResponse = self.http.get_json(&self.endpoint, &params, &headers)?;
            if resp.status.as_deref() == Some("error") {
                return Err(FetchError::Service(resp.message.unwrap_or_default()));
            }
            let n = resp.articles.len();
            for item in resp.articles {
                if let Some(a) = to_article(item, &query.language) {
                    if seen.insert(a.id.clone()) {
                        out.push(a);
                    }
                }
            }
            if (n as u32) < query.page_size {
                break;
            }
        }
        Ok(out)
    }
}

fn to_article(item: NewsItem, language: &str) -> Option<Article> {
    let published_at = parse_date(item.published_at.as_deref()?).ok()?;
    let title = item.title.unwrap_or_default();
    let body = item
        .content
        .filter(|c| !c.trim().is_empty())
        .or(item.description)
        .unwrap_or_default();
    let host = item
        .url
        .as_deref()
        .and_then(|u| url::Url::parse(u).ok())
        .and_then(|u| u.host_str().map(|h| h.trim_start_matches("www.").to_string()));
    let source_domain = host
        .or_else(|| item.source.and_then(|s| s.name))
        .unwrap_or_default();
    let id = item.url.unwrap_or_else(|| format!("{source_domain}/{title}/{published_at}"));
    Some(Article::new(id, title, body, source_domain, published_at, language))
}
