#include "rfseg/volume_io.hpp"

#include <zlib.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

namespace rfseg {

namespace {

constexpr char kMagic[4] = {'R', 'F', 'V', '1'};
constexpr uint32_t kDtypeF32 = 1;
constexpr uint32_t kDtypeI32 = 2;

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() &&
         s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<char> read_file(const std::string& path) {
  if (!std::filesystem::exists(path)) {
    throw NotFoundError("file not found: " + path);
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  return bytes;
}

bool is_gzip(const std::vector<char>& bytes) {
  return bytes.size() >= 2 && static_cast<unsigned char>(bytes[0]) == 0x1f &&
         static_cast<unsigned char>(bytes[1]) == 0x8b;
}

std::vector<char> gunzip(const std::vector<char>& in, const std::string& path) {
  z_stream zs{};
  if (inflateInit2(&zs, 15 + 16) != Z_OK) {
    throw IoError("zlib init failed for " + path);
  }
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(in.data()));
  zs.avail_in = static_cast<uInt>(in.size());
  std::vector<char> out;
  std::vector<char> buf(1 << 16);
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = reinterpret_cast<Bytef*>(buf.data());
    zs.avail_out = static_cast<uInt>(buf.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw IoError("gzip decompression failed for " + path);
    }
    out.insert(out.end(), buf.data(), buf.data() + buf.size() - zs.avail_out);
  }
  inflateEnd(&zs);
  return out;
}

void gzip_to_file(const std::string& path, const std::vector<char>& bytes) {
  gzFile f = gzopen(path.c_str(), "wb");
  if (!f) throw IoError("cannot open for writing: " + path);
  if (!bytes.empty() &&
      gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size())) !=
          static_cast<int>(bytes.size())) {
    gzclose(f);
    throw IoError("gzip write failed: " + path);
  }
  gzclose(f);
}

void write_file(const std::string& path, const std::vector<char>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path);
}

// ---- RFV1 -----------------------------------------------------------------

class ByteReader {
 public:
  ByteReader(const std::vector<char>& bytes, std::string path)
      : bytes_(bytes), path_(std::move(path)) {}

  template <typename T>
  T read(const char* field) {
    if (pos_ + sizeof(T) > bytes_.size()) {
      throw IoError("RFV1 parse error in " + path_ + " at offset " +
                    std::to_string(pos_) + ": truncated while reading field '" +
                    field + "'");
    }
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  const char* payload(size_t nbytes, const char* field) {
    if (pos_ + nbytes > bytes_.size()) {
      throw IoError("RFV1 parse error in " + path_ + " at offset " +
                    std::to_string(pos_) + ": payload '" + field +
                    "' needs " + std::to_string(nbytes) + " bytes, file has " +
                    std::to_string(bytes_.size() - pos_));
    }
    const char* p = bytes_.data() + pos_;
    pos_ += nbytes;
    return p;
  }

  size_t pos() const { return pos_; }

 private:
  const std::vector<char>& bytes_;
  std::string path_;
  size_t pos_ = 0;
};

struct Rfv1Payload {
  uint32_t dtype = 0;
  std::vector<int64_t> dims;
  std::array<double, 3> spacing{1, 1, 1};
  uint32_t num_classes = 0;
  torch::Tensor tensor;
};

Rfv1Payload read_rfv1(const std::string& path) {
  auto bytes = read_file(path);
  ByteReader r(bytes, path);
  char magic[4];
  for (int i = 0; i < 4; ++i) magic[i] = r.read<char>("magic");
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw IoError("RFV1 parse error in " + path +
                  " at offset 0: bad magic (expected 'RFV1')");
  }
  Rfv1Payload p;
  p.dtype = r.read<uint32_t>("dtype");
  if (p.dtype != kDtypeF32 && p.dtype != kDtypeI32) {
    throw IoError("RFV1 parse error in " + path + " at offset 4: dtype code " +
                  std::to_string(p.dtype) + " unknown");
  }
  const auto ndim = r.read<uint32_t>("ndim");
  if (ndim < 1 || ndim > 8) {
    throw IoError("RFV1 parse error in " + path + " at offset 8: ndim " +
                  std::to_string(ndim) + " out of range 1..8");
  }
  int64_t numel = 1;
  for (uint32_t i = 0; i < ndim; ++i) {
    const auto d = r.read<uint64_t>("dims");
    if (d == 0 || d > (1ull << 32)) {
      throw IoError("RFV1 parse error in " + path + ": dim " +
                    std::to_string(i) + " = " + std::to_string(d) +
                    " invalid");
    }
    p.dims.push_back(static_cast<int64_t>(d));
    numel *= static_cast<int64_t>(d);
  }
  for (auto& s : p.spacing) s = r.read<double>("spacing");
  p.num_classes = r.read<uint32_t>("num_classes");
  const size_t elem = p.dtype == kDtypeF32 ? 4 : 4;
  const char* raw = r.payload(static_cast<size_t>(numel) * elem, "data");
  auto dtype = p.dtype == kDtypeF32 ? torch::kFloat32 : torch::kInt32;
  p.tensor = torch::from_blob(const_cast<char*>(raw), p.dims, dtype).clone();
  return p;
}

std::vector<char> encode_rfv1(uint32_t dtype, const torch::Tensor& t,
                              const std::array<double, 3>& spacing,
                              uint32_t num_classes) {
  std::vector<char> out;
  auto put = [&out](const void* p, size_t n) {
    const char* c = static_cast<const char*>(p);
    out.insert(out.end(), c, c + n);
  };
  put(kMagic, 4);
  put(&dtype, 4);
  const uint32_t ndim = static_cast<uint32_t>(t.dim());
  put(&ndim, 4);
  for (int64_t i = 0; i < t.dim(); ++i) {
    const uint64_t d = static_cast<uint64_t>(t.size(i));
    put(&d, 8);
  }
  for (double s : spacing) put(&s, 8);
  put(&num_classes, 4);
  auto c = t.contiguous();
  put(c.data_ptr(), c.numel() * c.element_size());
  return out;
}

// ---- NIfTI-1 ---------------------------------------------------------------

#pragma pack(push, 1)
struct NiftiHeader {
  int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  int32_t extents;
  int16_t session_error;
  char regular;
  char dim_info;
  int16_t dim[8];
  float intent_p1, intent_p2, intent_p3;
  int16_t intent_code;
  int16_t datatype;
  int16_t bitpix;
  int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max, cal_min;
  float slice_duration;
  float toffset;
  int32_t glmax, glmin;
  char descrip[80];
  char aux_file[24];
  int16_t qform_code, sform_code;
  float quatern_b, quatern_c, quatern_d;
  float qoffset_x, qoffset_y, qoffset_z;
  float srow_x[4], srow_y[4], srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)
static_assert(sizeof(NiftiHeader) == 348, "NIfTI-1 header must be 348 bytes");

enum NiftiDatatype : int16_t {
  kNiftiU8 = 2,
  kNiftiI16 = 4,
  kNiftiI32 = 8,
  kNiftiF32 = 16,
  kNiftiF64 = 64,
  kNiftiU16 = 512,
};

struct NiftiPayload {
  torch::Tensor tensor;           // [T, Z, Y, X] float or int
  std::array<double, 3> spacing;  // (z, y, x)
};

NiftiPayload read_nifti(const std::string& path) {
  auto bytes = read_file(path);
  if (is_gzip(bytes)) bytes = gunzip(bytes, path);
  if (bytes.size() < sizeof(NiftiHeader)) {
    throw IoError("NIfTI parse error in " + path + ": file shorter than the " +
                  std::to_string(sizeof(NiftiHeader)) + "-byte header");
  }
  NiftiHeader hdr;
  std::memcpy(&hdr, bytes.data(), sizeof(hdr));
  if (hdr.sizeof_hdr != 348) {
    throw IoError("NIfTI parse error in " + path +
                  " at offset 0: sizeof_hdr=" + std::to_string(hdr.sizeof_hdr) +
                  " (expected 348; big-endian files are not supported)");
  }
  if (std::strncmp(hdr.magic, "n+1", 3) != 0 &&
      std::strncmp(hdr.magic, "ni1", 3) != 0) {
    throw IoError("NIfTI parse error in " + path +
                  " at offset 344: bad magic field");
  }
  const int ndim = hdr.dim[0];
  if (ndim < 2 || ndim > 4) {
    throw IoError("NIfTI parse error in " + path + ": dim[0]=" +
                  std::to_string(ndim) + " unsupported (need 2..4)");
  }
  const int64_t nx = hdr.dim[1];
  const int64_t ny = ndim >= 2 ? hdr.dim[2] : 1;
  const int64_t nz = ndim >= 3 ? hdr.dim[3] : 1;
  const int64_t nt = ndim >= 4 ? hdr.dim[4] : 1;
  const int64_t numel = nx * ny * nz * nt;
  const size_t offset = static_cast<size_t>(hdr.vox_offset);
  torch::ScalarType stype;
  size_t elem;
  switch (hdr.datatype) {
    case kNiftiU8: stype = torch::kUInt8; elem = 1; break;
    case kNiftiI16: stype = torch::kInt16; elem = 2; break;
    case kNiftiI32: stype = torch::kInt32; elem = 4; break;
    case kNiftiF32: stype = torch::kFloat32; elem = 4; break;
    case kNiftiF64: stype = torch::kFloat64; elem = 8; break;
    default:
      throw IoError("NIfTI parse error in " + path + " at offset 70: datatype " +
                    std::to_string(hdr.datatype) + " unsupported");
  }
  if (offset + static_cast<size_t>(numel) * elem > bytes.size()) {
    throw IoError("NIfTI parse error in " + path + ": payload needs " +
                  std::to_string(numel * elem) + " bytes at offset " +
                  std::to_string(offset) + ", file has " +
                  std::to_string(bytes.size()));
  }
  // NIfTI stores x fastest; read as [T, Z, Y, X].
  auto t = torch::from_blob(bytes.data() + offset, {nt, nz, ny, nx},
                            torch::TensorOptions().dtype(stype))
               .clone();
  if (hdr.scl_slope != 0.f && (hdr.scl_slope != 1.f || hdr.scl_inter != 0.f)) {
    t = t.to(torch::kFloat32) * hdr.scl_slope + hdr.scl_inter;
  }
  NiftiPayload p;
  p.tensor = t;
  p.spacing = {hdr.pixdim[3] > 0 ? hdr.pixdim[3] : 1.0,
               hdr.pixdim[2] > 0 ? hdr.pixdim[2] : 1.0,
               hdr.pixdim[1] > 0 ? hdr.pixdim[1] : 1.0};
  return p;
}

std::vector<char> encode_nifti(const torch::Tensor& t,  // [T, Z, Y, X]
                               const std::array<double, 3>& spacing,
                               int16_t datatype) {
  NiftiHeader hdr{};
  hdr.sizeof_hdr = 348;
  hdr.regular = 'r';
  hdr.dim[0] = 4;
  hdr.dim[1] = static_cast<int16_t>(t.size(3));
  hdr.dim[2] = static_cast<int16_t>(t.size(2));
  hdr.dim[3] = static_cast<int16_t>(t.size(1));
  hdr.dim[4] = static_cast<int16_t>(t.size(0));
  for (int i = 5; i < 8; ++i) hdr.dim[i] = 1;
  hdr.datatype = datatype;
  hdr.bitpix = datatype == kNiftiF32 || datatype == kNiftiI32 ? 32 : 8;
  hdr.pixdim[0] = 1.f;
  hdr.pixdim[1] = static_cast<float>(spacing[2]);
  hdr.pixdim[2] = static_cast<float>(spacing[1]);
  hdr.pixdim[3] = static_cast<float>(spacing[0]);
  hdr.pixdim[4] = 1.f;
  hdr.vox_offset = 352.f;
  hdr.scl_slope = 1.f;
  hdr.scl_inter = 0.f;
  hdr.sform_code = 0;
  hdr.qform_code = 0;
  std::memcpy(hdr.magic, "n+1", 4);
  std::vector<char> out(sizeof(hdr) + 4, 0);  // header + empty extension flag
  std::memcpy(out.data(), &hdr, sizeof(hdr));
  auto c = t.contiguous();
  const char* raw = static_cast<const char*>(c.data_ptr());
  out.insert(out.end(), raw, raw + c.numel() * c.element_size());
  return out;
}

}  // namespace

Volume load_volume(const std::string& path) {
  if (ends_with(path, ".rfv")) {
    auto p = read_rfv1(path);
    if (p.dtype != kDtypeF32 || p.dims.size() != 4) {
      throw IoError("RFV1 file " + path +
                    " does not hold an intensity volume (expected f32 with "
                    "4 dims [M, D, H, W])");
    }
    return Volume(p.tensor, p.spacing,
                  std::filesystem::path(path).stem().string());
  }
  if (ends_with(path, ".nii") || ends_with(path, ".nii.gz")) {
    auto p = read_nifti(path);
    // [T, Z, Y, X] -> [M, D, H, W]
    auto id = std::filesystem::path(path).filename().string();
    return Volume(p.tensor.to(torch::kFloat32), p.spacing, id);
  }
  throw IoError("unrecognized volume extension: " + path +
                " (expected .rfv, .nii or .nii.gz)");
}

void save_volume(const std::string& path, const Volume& volume) {
  if (ends_with(path, ".rfv")) {
    write_file(path, encode_rfv1(kDtypeF32, volume.data, volume.spacing, 0));
    return;
  }
  if (ends_with(path, ".nii.gz")) {
    gzip_to_file(path, encode_nifti(volume.data.to(torch::kFloat32),
                                    volume.spacing, kNiftiF32));
    return;
  }
  if (ends_with(path, ".nii")) {
    write_file(path, encode_nifti(volume.data.to(torch::kFloat32),
                                  volume.spacing, kNiftiF32));
    return;
  }
  throw IoError("unrecognized volume extension: " + path);
}

LabelVolume load_labels(const std::string& path) {
  if (ends_with(path, ".rfv")) {
    auto p = read_rfv1(path);
    if (p.dtype != kDtypeI32 || p.dims.size() != 3) {
      throw IoError("RFV1 file " + path +
                    " does not hold labels (expected i32 with 3 dims "
                    "[D, H, W])");
    }
    return LabelVolume(p.tensor.to(torch::kInt64),
                       static_cast<int64_t>(p.num_classes));
  }
  if (ends_with(path, ".nii") || ends_with(path, ".nii.gz")) {
    auto p = read_nifti(path);
    if (p.tensor.size(0) != 1) {
      throw IoError("NIfTI label file " + path + " has multiple time frames");
    }
    auto labels = p.tensor[0].to(torch::kInt64);
    const int64_t k = labels.numel() > 0 ? labels.max().item<int64_t>() : 0;
    return LabelVolume(labels, k);
  }
  throw IoError("unrecognized label extension: " + path);
}

void save_labels(const std::string& path, const LabelVolume& labels) {
  auto i32 = labels.labels.to(torch::kInt32);
  if (ends_with(path, ".rfv")) {
    write_file(path, encode_rfv1(kDtypeI32, i32, {1, 1, 1},
                                 static_cast<uint32_t>(labels.num_classes)));
    return;
  }
  if (ends_with(path, ".nii.gz")) {
    gzip_to_file(path, encode_nifti(i32.unsqueeze(0), {1, 1, 1}, kNiftiI32));
    return;
  }
  if (ends_with(path, ".nii")) {
    write_file(path, encode_nifti(i32.unsqueeze(0), {1, 1, 1}, kNiftiI32));
    return;
  }
  throw IoError("unrecognized label extension: " + path);
}

}  // namespace rfseg
