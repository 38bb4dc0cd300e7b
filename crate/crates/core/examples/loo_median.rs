//! Element-wise medians and O(d) leave-one-out updates from a column
//! order index.
//!
//! cargo run --example loo_median

use medix::stats::{element_wise_median, ColumnOrderIndex, GradientMatrix};

fn main() -> medix::Result<()> {
    let g = GradientMatrix::from_rows(&[
        [0.1, 2.0, -1.0],
        [0.3, 1.5, -0.5],
        [0.2, 1.8, -0.7],
        [9.0, 9.0, 9.0], // far from the rest
        [0.25, 1.7, -0.6],
    ])?;
    let ewm = element_wise_median(&g);
    println!("element-wise median: {:?}", ewm.values());

    let mut index = ColumnOrderIndex::build(&g);
    for row in 0..g.rows() {
        println!("without row {row}: {:?}", index.loo_median(&g, row)?.values());
    }

    index.remove_rows(&[3])?;
    println!("after removing row 3, median = {:?}", index.median(&g)?.values());
    index.restore_rows(&g, &[3])?;
    println!("restored: {} live rows", index.live_count());
    Ok(())
}
