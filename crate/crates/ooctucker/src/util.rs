//! Small shared helpers: CRC-32 checksums and little-endian framing used by
//! the binary file formats.

/// CRC-32 (IEEE 802.3, reflected, polynomial 0xEDB88320), the checksum used
/// by the slice and decomposition containers.
pub fn crc32(bytes: &[u8]) -> u32 {
    const TABLE: [u32; 256] = build_table();
    let mut crc = 0xFFFF_FFFFu32;
    for &b in bytes {
        let idx = ((crc ^ b as u32) & 0xFF) as usize;
        crc = (crc >> 8) ^ TABLE[idx];
    }
    !crc
}

const fn build_table() -> [u32; 256] {
    let mut table = [0u32; 256];
    let mut i = 0;
    while i < 256 {
        let mut c = i as u32;
        let mut k = 0;
        while k < 8 {
            c = if c & 1 != 0 {
                0xEDB8_8320 ^ (c >> 1)
            } else {
                c >> 1
            };
            k += 1;
        }
        table[i] = c;
        i += 1;
    }
    table
}

/// Incremental writer that checksums everything it emits.
pub struct ChecksumWriter<'a, W: std::io::Write> {
    inner: &'a mut W,
    crc: u32,
}

impl<'a, W: std::io::Write> ChecksumWriter<'a, W> {
    pub fn new(inner: &'a mut W) -> Self {
        Self {
            inner,
            crc: 0xFFFF_FFFF,
        }
    }

    pub fn write_all(&mut self, bytes: &[u8]) -> std::io::Result<()> {
        const TABLE: [u32; 256] = build_table();
        for &b in bytes {
            let idx = ((self.crc ^ b as u32) & 0xFF) as usize;
            self.crc = (self.crc >> 8) ^ TABLE[idx];
        }
        self.inner.write_all(bytes)
    }

    pub fn write_u32(&mut self, v: u32) -> std::io::Result<()> {
        self.write_all(&v.to_le_bytes())
    }

    pub fn write_u64(&mut self, v: u64) -> std::io::Result<()> {
        self.write_all(&v.to_le_bytes())
    }

    pub fn write_f64(&mut self, v: f64) -> std::io::Result<()> {
        self.write_all(&v.to_le_bytes())
    }

    /// Appends the checksum of everything written so far.
    pub fn finish(self) -> std::io::Result<()> {
        let crc = !self.crc;
        self.inner.write_all(&crc.to_le_bytes())
    }
}

/// Incremental reader mirroring [`ChecksumWriter`].
pub struct ChecksumReader<'a, R: std::io::Read> {
    inner: &'a mut R,
    crc: u32,
}

impl<'a, R: std::io::Read> ChecksumReader<'a, R> {
    pub fn new(inner: &'a mut R) -> Self {
        Self {
            inner,
            crc: 0xFFFF_FFFF,
        }
    }

    pub fn read_exact(&mut self, buf: &mut [u8]) -> std::io::Result<()> {
        const TABLE: [u32; 256] = build_table();
        self.inner.read_exact(buf)?;
        for &b in buf.iter() {
            let idx = ((self.crc ^ b as u32) & 0xFF) as usize;
            self.crc = (self.crc >> 8) ^ TABLE[idx];
        }
        Ok(())
    }

    pub fn read_u32(&mut self) -> std::io::Result<u32> {
        let mut b = [0u8; 4];
        self.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    pub fn read_u64(&mut self) -> std::io::Result<u64> {
        let mut b = [0u8; 8];
        self.read_exact(&mut b)?;
        Ok(u64::from_le_bytes(b))
    }

    pub fn read_f64(&mut self) -> std::io::Result<f64> {
        let mut b = [0u8; 8];
        self.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    }

    /// Reads the trailing checksum and reports whether it matches.
    pub fn verify(self) -> std::io::Result<bool> {
        let expect = !self.crc;
        let mut b = [0u8; 4];
        self.inner.read_exact(&mut b)?;
        Ok(u32::from_le_bytes(b) == expect)
    }
}
