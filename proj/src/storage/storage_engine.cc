#include "petastore/storage/storage_engine.h"

#include <cmath>

namespace petastore::storage {

FileId TertiaryStore::archive(StoredFile file) {
  std::lock_guard lock(mu_);
  const FileId id = next_id_++;
  file.file_id = id;
  files_.emplace(id, std::make_shared<const StoredFile>(std::move(file)));
  return id;
}

bool TertiaryStore::contains(FileId id) const {
  std::lock_guard lock(mu_);
  return files_.count(id) != 0;
}

std::shared_ptr<const StoredFile> TertiaryStore::get(FileId id) const {
  std::lock_guard lock(mu_);
  auto it = files_.find(id);
  return it == files_.end() ? nullptr : it->second;
}

std::vector<FileId> TertiaryStore::ids() const {
  std::lock_guard lock(mu_);
  std::vector<FileId> out;
  out.reserve(files_.size());
  for (const auto& [id, _] : files_) out.push_back(id);
  return out;
}

SimDuration TertiaryStore::fetch_latency(std::uint64_t bytes) const {
  constexpr double kGiB = 1024.0 * 1024.0 * 1024.0;
  const double secs = static_cast<double>(bytes) / kGiB * latency_.seconds_per_gib;
  return latency_.base + SimDuration(static_cast<std::int64_t>(std::llround(secs * 1e6)));
}

StorageEngine::StorageEngine(std::string name, TertiaryStore& tertiary, const Clock& clock,
                             std::uint32_t block_size, const CodecRegistry& codecs)
    : name_(std::move(name)),
      tertiary_(tertiary),
      clock_(clock),
      block_size_(block_size),
      codecs_(codecs) {}

void StorageEngine::settle_locked(SimTime now) const {
  for (auto it = staging_.begin(); it != staging_.end();) {
    if (it->second.completion <= now) {
      resident_[it->first] = it->second.file;
      it = staging_.erase(it);
    } else {
      ++it;
    }
  }
}

Result<std::shared_ptr<const StoredFile>> StorageEngine::put_file(ByteSpan contents,
                                                                   std::uint8_t codec) {
  auto built = build_stored_file(contents, codec, block_size_, codecs_);
  if (!built.ok()) return built.error();
  const FileId id = tertiary_.archive(std::move(built).value());
  auto file = tertiary_.get(id);
  std::lock_guard lock(mu_);
  resident_[id] = file;
  return file;
}

Result<FrameSet> StorageEngine::read_blocks(FileId id, std::uint64_t offset, std::uint64_t len) {
  std::shared_ptr<const StoredFile> file;
  {
    std::lock_guard lock(mu_);
    settle_locked(clock_.now());
    auto it = resident_.find(id);
    if (it == resident_.end()) return Error(ErrorCode::kNotResident, std::to_string(id));
    file = it->second;
  }
  return select_frames(*file, offset, len);
}

Result<Staging> StorageEngine::fetch_from_tertiary(FileId id, SimTime now) {
  std::lock_guard lock(mu_);
  settle_locked(now);
  if (auto it = staging_.find(id); it != staging_.end()) return it->second;
  auto file = tertiary_.get(id);
  if (!file) return Error(ErrorCode::kNotInTertiary, std::to_string(id));
  Staging s{file, now + tertiary_.fetch_latency(file->physical_size())};
  staging_.emplace(id, s);
  return s;
}

std::optional<SimTime> StorageEngine::staging_completion(FileId id) const {
  std::lock_guard lock(mu_);
  settle_locked(clock_.now());
  auto it = staging_.find(id);
  if (it == staging_.end()) return std::nullopt;
  return it->second.completion;
}

void StorageEngine::inject_torn_write(FileId id, std::uint32_t block_no) {
  std::lock_guard lock(mu_);
  settle_locked(clock_.now());
  auto it = resident_.find(id);
  if (it == resident_.end() || block_no >= it->second->meta.block_count()) return;
  auto torn = std::make_shared<StoredFile>(*it->second);
  const auto& e = torn->meta.index[block_no];
  // Garble the tail half of the frame as an interrupted rewrite would.
  const std::size_t begin = e.physical_offset + e.compressed_len / 2;
  const std::size_t end = e.physical_offset + e.compressed_len;
  for (std::size_t i = begin; i < end; ++i) torn->image[i] ^= 0xA5;
  it->second = std::move(torn);
}

void StorageEngine::install(std::shared_ptr<const StoredFile> file) {
  std::lock_guard lock(mu_);
  resident_[file->file_id] = std::move(file);
}

bool StorageEngine::evict(FileId id) {
  std::lock_guard lock(mu_);
  settle_locked(clock_.now());
  return resident_.erase(id) != 0;
}

bool StorageEngine::is_resident(FileId id) const {
  std::lock_guard lock(mu_);
  settle_locked(clock_.now());
  return resident_.count(id) != 0;
}

std::shared_ptr<const StoredFile> StorageEngine::resident(FileId id) const {
  std::lock_guard lock(mu_);
  settle_locked(clock_.now());
  auto it = resident_.find(id);
  return it == resident_.end() ? nullptr : it->second;
}

std::vector<FileId> StorageEngine::resident_files() const {
  std::lock_guard lock(mu_);
  settle_locked(clock_.now());
  std::vector<FileId> out;
  for (const auto& [id, _] : resident_) out.push_back(id);
  return out;
}

std::uint64_t StorageEngine::disk_used() const {
  std::lock_guard lock(mu_);
  settle_locked(clock_.now());
  std::uint64_t total = 0;
  for (const auto& [_, f] : resident_) total += f->physical_size();
  return total;
}

}  // namespace petastore::storage
