package shop.cart;

import shop.catalog.Catalog;
import shop.catalog.Product;
import java.util.ArrayList;
import java.util.List;

public class Cart {
    private final List<CartLine> lines = new ArrayList<>();
    private final Catalog catalog;

    public Cart(Catalog catalog) {
        this.catalog = catalog;
    }

    public void addItem(String sku, int qty) {
        Product p = catalog.findProduct(sku);
        lines.add(new CartLine(p, qty));
    }

    public void addItem(String sku) {
        addItem(sku, 1);
    }

    public void removeItem(String sku) {
        lines.removeIf(l -> l.getProduct().getSku().equals(sku));
    }

    public int totalCents() {
        int total = 0;
        for (CartLine l : lines) {
            total += l.subtotalCents();
        }
        return total;
    }

    public List<CartLine> getLines() {
        return lines;
    }
}
