mod common;

use serde_json::{json, Value};
use textbook_core::ingest::extract;
use textbook_server::ServerConfig;

#[tokio::test]
async fn upload_list_get_and_pages() {
    let server = common::default_server().await;
    let pdf = common::three_page_pdf();
    let manifest = server.upload(pdf.clone()).await;
    assert_eq!(manifest["pages"], 3);
    assert_eq!(manifest["title"], "Fixture");
    assert_eq!(manifest["sections"].as_array().unwrap().len(), 3);
    let doc_id = manifest["doc_id"].as_str().unwrap();

    let list: Vec<Value> = server.client.get(server.url("/documents")).send().await.unwrap().json().await.unwrap();
    assert_eq!(list.len(), 1);
    assert_eq!(list[0]["doc_id"], doc_id);
    let got: Value = server.client.get(server.url(&format!("/documents/{doc_id}"))).send().await.unwrap().json().await.unwrap();
    assert_eq!(got, manifest);

    let expected = extract(&pdf).unwrap();
    for n in 1..=3u32 {
        let page: Value = server
            .client
            .get(server.url(&format!("/documents/{doc_id}/pages/{n}")))
            .send()
            .await
            .unwrap()
            .json()
            .await
            .unwrap();
        let want = expected.page(n).unwrap();
        assert_eq!(page["char_count"], want.char_count);
        assert_eq!(page["text"], want.text.as_str());
    }
    for path in [format!("/documents/{doc_id}/pages/4"), format!("/documents/{doc_id}/pages/0"), "/documents/nope".into(), "/documents/nope/pages/1".into()] {
        assert_eq!(server.client.get(server.url(&path)).send().await.unwrap().status(), 404, "{path}");
    }

    let dir = server.dir.path().join("docs").join(doc_id);
    for file in ["manifest.json", "pages.jsonl", "chunks.jsonl", "index.json"] {
        assert!(dir.join(file).is_file(), "{file}");
    }
}

#[tokio::test]
async fn rejects_bad_uploads() {
    let server = common::spawn(|dir| ServerConfig { max_upload_bytes: 4096, ..ServerConfig::for_tests(dir) }).await;
    let post = |body: Vec<u8>| server.client.post(server.url("/documents")).header("content-type", "application/pdf").body(body).send();
    assert_eq!(post(Vec::new()).await.unwrap().status(), 400);
    let res = post(b"%PDF-1.4 garbage".to_vec()).await.unwrap();
    assert_eq!(res.status(), 400);
    assert!(res.json::<Value>().await.unwrap()["error"].as_str().unwrap().contains("malformed"));
    assert_eq!(post(vec![b'x'; 10_000]).await.unwrap().status(), 413);
    let list: Vec<Value> = server.client.get(server.url("/documents")).send().await.unwrap().json().await.unwrap();
    assert!(list.is_empty());
    let leftovers = std::fs::read_dir(server.dir.path().join("docs")).unwrap().count();
    assert_eq!(leftovers, 0);
}

#[tokio::test]
async fn multipart_upload_uses_file_name_as_fallback_title() {
    let server = common::default_server().await;
    let pdf = textbook_core::ingest::pdfgen::PdfBuilder::new("").page(["Some text here."]).build();
    let form = reqwest::multipart::Form::new().part("file", reqwest::multipart::Part::bytes(pdf).file_name("Week 3 Notes.pdf"));
    let res = server.client.post(server.url("/documents")).multipart(form).send().await.unwrap();
    assert_eq!(res.status(), 201);
    let manifest: Value = res.json().await.unwrap();
    assert_eq!(manifest["title"], "Week 3 Notes");
}

#[tokio::test]
async fn concurrent_uploads_get_distinct_ids() {
    let server = common::default_server().await;
    let a = common::three_page_pdf();
    let b = common::long_pdf(4, &["alpha", "beta"]);
    let (ma, mb) = tokio::join!(server.upload(a), server.upload(b));
    assert_ne!(ma["doc_id"], mb["doc_id"]);
    let list: Vec<Value> = server.client.get(server.url("/documents")).send().await.unwrap().json().await.unwrap();
    assert_eq!(list.len(), 2);
}

#[tokio::test]
async fn unknown_routes_and_ids() {
    let server = common::default_server().await;
    let res = server
        .client
        .post(server.url("/sessions"))
        .json(&json!({ "learner_id": "amy", "doc_id": "missing" }))
        .send()
        .await
        .unwrap();
    assert_eq!(res.status(), 404);
    let res = server
        .client
        .post(server.url("/sessions"))
        .json(&json!({ "learner_id": "../x", "doc_id": "missing" }))
        .send()
        .await
        .unwrap();
    assert_eq!(res.status(), 400);
    let (status, _, _) = server.sse("/sessions/nope/chat", json!({ "query": "hi" })).await;
    assert_eq!(status, 404);
}
