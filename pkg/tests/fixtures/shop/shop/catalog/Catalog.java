package shop.catalog;

import java.util.HashMap;
import java.util.Map;

public class Catalog {
    private final Map<String, Product> products = new HashMap<>();

    public void addProduct(Product p) {
        products.put(p.getSku(), p);
    }

    public Product findProduct(String sku) {
        return products.get(sku);
    }

    public void removeProduct(String sku) {
        products.remove(sku);
    }

    public void updatePrice(String sku, int cents) {
        Product p = findProduct(sku);
        if (p != null) {
            p.updatePrice(cents);
        }
    }
}
