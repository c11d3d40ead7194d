//! Regional wage gaps for two survey waves, the population-weighted median
//! split, switcher groups and adoption cohorts.
//!
//! Run with `cargo run --example wage_gap_bite`.

use paneldid::bite::{
    correlations, read_region_values, wage_gap, weighted_median, CohortDates, SplitRule, TreatmentDesign, WageMicrodata,
};

const WAVE_2014: &str = "region,hourly_wage\n\
north,9.80\nnorth,12.10\nnorth,8.60\n\
south,7.10\nsouth,8.00\nsouth,11.00\n\
east,6.50\neast,7.90\neast,8.40\neast,10.00\n\
west,14.00\nwest,8.45\n";

const WAVE_2018: &str = "region,hourly_wage\n\
north,8.00\nnorth,9.00\n\
south,9.50\nsouth,12.00\n\
east,8.90\neast,9.10\n\
west,15.00\nwest,9.10\n";

const POPULATION: &str = "region,weight\nnorth,1\nsouth,3\neast,3\nwest,1\n";

fn main() -> paneldid::Result<()> {
    let population = read_region_values(POPULATION.as_bytes())?;
    let g14 = wage_gap(&WageMicrodata::from_csv(WAVE_2014.as_bytes(), 8.50, 2014)?)?;
    let g18 = wage_gap(&WageMicrodata::from_csv(WAVE_2018.as_bytes(), 9.19, 2018)?)?;

    for table in [&g14, &g18] {
        let median = weighted_median(&table.gaps(), &population)?;
        println!("{} (minimum wage {:.2}), weighted median gap {median:.4}", table.survey_year, table.minimum_wage);
        for (region, row) in &table.rows {
            println!("  {region:<6} gap {:.4} from {} workers", row.gap, row.worker_count);
        }
    }

    let design = TreatmentDesign::from_gaps(&g14, &g18, &population, SplitRule::AtOrAbove, CohortDates::default())?;
    for (region, t) in &design.regions {
        let cohort = t.cohort.map_or("never".to_string(), |c| c.to_string());
        println!("{region:<6} {:<10} first treated {cohort}", t.group());
    }

    let corr = correlations(&g14.gaps(), &g18.gaps())?;
    println!("pearson {:.3}, spearman {:.3}", corr.pearson, corr.spearman);
    Ok(())
}
