#include "gtcausin/digest.hpp"

#include <fstream>
#include <iterator>

#include <openssl/evp.h>

#include "gtcausin/error.hpp"

namespace gtc {

std::string sha256_hex(std::string_view bytes) {
	unsigned char md[EVP_MAX_MD_SIZE];
	unsigned int len = 0;
	if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
		throw std::runtime_error("sha256 failed");
	}
	static constexpr char hex[] = "0123456789abcdef";
	std::string out;
	for (unsigned int i = 0; i < len; ++i) {
		out += hex[md[i] >> 4];
		out += hex[md[i] & 15];
	}
	return out;
}

std::string sha256_file(const std::string& path) {
	std::ifstream in(path, std::ios::binary);
	if (!in) {
		throw InputError("cannot open '" + path + "'");
	}
	const std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
	return sha256_hex(content);
}

} // namespace gtc
