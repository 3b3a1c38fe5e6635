//! Serve the annotation API on 127.0.0.1:8080 (or the address given as the
//! first argument) until Ctrl-C.
//!
//!     cargo run --example annotation_server -- 127.0.0.1:9000
//!     curl 'http://127.0.0.1:9000/tasks/next?annotator=ann'

use std::sync::Arc;

use nature_disclosure::annotation::{router, serve, AnnotationStore, Task};
use nature_disclosure::guidelines::Guidelines;

#[tokio::main]
async fn main() -> std::io::Result<()> {
    let addr = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "127.0.0.1:8080".into())
        .parse()
        .expect("socket address");
    let tasks = (1..=5)
        .map(|i| Task {
            sample_id: format!("s{i}"),
            text: format!("Demo sentence {i} on river basins."),
        })
        .collect();
    let store = AnnotationStore::new(tasks, &["ann", "ben", "cat", "dan"]).unwrap();
    let app = router(Arc::new(store), Guidelines::builtin(), None);
    println!("listening on http://{addr}");
    serve(app, addr).await
}
