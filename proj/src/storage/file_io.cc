#include <fstream>
#include <iterator>

#include "petastore/storage/stored_file.h"

namespace petastore::storage {

Status write_image_file(const std::filesystem::path& path, const StoredFile& file) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return Error(ErrorCode::kIoError, "cannot open " + path.string());
  out.write(reinterpret_cast<const char*>(file.image.data()),
            static_cast<std::streamsize>(file.image.size()));
  if (!out) return Error(ErrorCode::kIoError, "short write to " + path.string());
  return Status::OK();
}

Result<StoredFile> read_image_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return Error(ErrorCode::kIoError, "cannot open " + path.string());
  Bytes image((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_stored_file(std::move(image));
}

}  // namespace petastore::storage
