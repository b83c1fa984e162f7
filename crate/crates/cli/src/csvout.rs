//! RFC-4180 CSV emission: CRLF line endings, mandatory header row, floats
//! printed with 17 significant digits.

use anyhow::Result;

pub struct CsvBuilder {
    writer: csv::Writer<Vec<u8>>,
}

pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

impl CsvBuilder {
    pub fn new(header: &[&str]) -> Result<Self> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::CRLF)
            .from_writer(Vec::new());
        writer.write_record(header)?;
        Ok(CsvBuilder { writer })
    }

    pub fn row(&mut self, fields: &[String]) -> Result<()> {
        self.writer.write_record(fields)?;
        Ok(())
    }

    pub fn finish(self) -> Result<Vec<u8>> {
        Ok(self.writer.into_inner()?)
    }
}
