#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "fl/protocol/types.h"

namespace fl {

enum class PutResult { kCreated, kUpdated };

// Durable map FunctionId -> FunctionDescriptor. Descriptors are stored
// verbatim; timestamps are the caller's responsibility.
//
// Errors: Error(kNotFound), Error(kInvalidDescriptor), Error(kStorageUnavailable).
class FunctionStore {
 public:
  virtual ~FunctionStore() = default;

  virtual PutResult Put(const FunctionDescriptor& d) = 0;
  virtual FunctionDescriptor Get(const FunctionId& id) const = 0;
  virtual bool Contains(const FunctionId& id) const = 0;
  virtual void Delete(const FunctionId& id) = 0;
  virtual std::vector<FunctionId> List() const = 0;
};

class InMemoryFunctionStore final : public FunctionStore {
 public:
  PutResult Put(const FunctionDescriptor& d) override;
  FunctionDescriptor Get(const FunctionId& id) const override;
  bool Contains(const FunctionId& id) const override;
  void Delete(const FunctionId& id) override;
  std::vector<FunctionId> List() const override;

 private:
  mutable std::mutex mu_;
  std::unordered_map<FunctionId, FunctionDescriptor, FunctionIdHash> entries_;
};

// One file per function at <root>/<module>/<name>.flfn:
//   "FLFN" | u32 BE version (1) | u64 BE CRC-64/XZ of the rest | descriptor
// Writes go to a temp file that is fsynced and renamed over the target, so a
// crash leaves either the old or the new file in place.
class FileFunctionStore final : public FunctionStore {
 public:
  // Creates `root` if needed; throws Error(kStorageUnavailable) if it is not
  // a writable directory.
  explicit FileFunctionStore(std::filesystem::path root);

  PutResult Put(const FunctionDescriptor& d) override;
  FunctionDescriptor Get(const FunctionId& id) const override;
  bool Contains(const FunctionId& id) const override;
  void Delete(const FunctionId& id) override;
  std::vector<FunctionId> List() const override;

  std::filesystem::path PathFor(const FunctionId& id) const;

 private:
  std::filesystem::path root_;
  mutable std::mutex write_mu_;
};

inline constexpr uint32_t kFlfnVersion = 1;

std::string EncodeFlfn(const FunctionDescriptor& d);
// Throws Error(kStorageUnavailable) on bad magic, version or checksum.
FunctionDescriptor DecodeFlfn(std::string_view bytes);

uint64_t Crc64(std::string_view bytes);

struct StoreConfig {
  enum class Backend { kInMemory, kFileBacked };
  Backend backend = Backend::kInMemory;
  std::filesystem::path root_path;
};

std::unique_ptr<FunctionStore> MakeFunctionStore(const StoreConfig& config);

}  // namespace fl
