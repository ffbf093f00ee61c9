//! Parses and renders the read-only SQL subset, and shows what it refuses.
//!
//! `cargo run -p dir-core --example sql_subset`

use dir_core::sql::parse_sql;

fn main() {
    for sql in [
        "select * from backpacks__joined where color != 'black' and (price < 400 or product_size in ('15 liter', '22 liter')) order by price desc limit 5",
        "SELECT product_id, title FROM perfumes__joined WHERE NOT gender = 'men' AND color IS ANY",
        "DELETE FROM backpacks__joined",
        "SELECT * FROM a JOIN b ON a.id = b.id",
        "SELECT * FROM backpacks__joined; DROP TABLE x",
    ] {
        match parse_sql(sql) {
            Ok(ast) => println!("ok:      {}", ast.render()),
            Err(e) => println!("refused: {e}\n         {sql}"),
        }
    }
}
