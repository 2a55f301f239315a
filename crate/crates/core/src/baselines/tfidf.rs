pub struct TfidfConfig;
pub struct TfidfModel;
